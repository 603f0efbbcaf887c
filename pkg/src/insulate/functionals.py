"""Energy, estimator and error-measure evaluations.

Discrete energies act on CR / RT0 functions; continuous energies act on
conforming P1 candidates and RT0 fluxes (the latter only for constant
data, where the flux is admissible without a data lift).  The gap
splits into a flux-mismatch part over elements and a boundary
Fenchel-Young part over insulated sides.
"""

import numpy as np

from . import quadrature as quad
from . import spaces
from .spaces import CRFunction, P1Function, RT0Function

_ADMISSIBLE_TOL = 1e-10


class Inadmissible(ValueError):
    """Candidate violates an equality constraint of its energy domain."""


class DegenerateTrace(ValueError):
    """Insulated boundary trace has zero L1 norm."""


def _segment_abs_integral(a, b, lengths):
    """Exact integral of |v| over segments for affine v with endpoint
    values a, b (splits each segment at its sign change)."""
    same = a * b >= 0.0
    out = np.empty_like(a)
    out[same] = 0.5 * np.abs(a + b)[same]
    mixed = ~same
    out[mixed] = 0.5 * (a[mixed] ** 2 + b[mixed] ** 2) \
        / (np.abs(a[mixed]) + np.abs(b[mixed]))
    return lengths * out


def _cr_side_endpoint_values(v):
    """Trace values of a CR function at the two side endpoints, taken from
    the minus element, shape (ns, 2)."""
    mesh = v.mesh
    aff = spaces.cr_to_affine(v)
    t = mesh.side_elements[:, 0]
    ends = mesh.vertices[mesh.sides]              # (ns, 2, 2)
    d = ends - mesh.barycenters[t][:, None, :]
    return aff.value[t][:, None] + np.einsum("kd,kjd->kj", aff.gradient[t], d)


def _check_dirichlet(dof_values, u_D_h, sides, what):
    if len(sides) == 0:
        return
    err = np.abs(dof_values[sides] - u_D_h[sides]).max()
    scale = 1.0 + np.abs(u_D_h[sides]).max()
    if err > _ADMISSIBLE_TOL * scale:
        raise Inadmissible(
            f"{what}: Dirichlet trace mismatch {err:.3e}")


def discrete_primal_energy(v, data, mesh=None):
    """Discrete primal energy of a CR candidate.

    Raises Inadmissible when the side means on the Dirichlet boundary do
    not match the reduced Dirichlet data.
    """
    mesh = mesh or v.mesh
    disc = data.reduce(mesh)
    _check_dirichlet(v.dof, disc.u_D_h, mesh.dirichlet_sides,
                     "primal candidate")
    grad = spaces.cr_gradient(v)
    val = 0.5 * float(np.sum(np.einsum("ij,ij->i", grad, grad) * mesh.areas))
    ins = mesh.insulated_sides
    l1 = float(np.sum(mesh.side_lengths[ins] * np.abs(v.dof[ins])))
    val += l1 ** 2 / (2.0 * data.m)
    val -= float(np.sum(disc.f_h * spaces.cr_element_means(v) * mesh.areas))
    ns = mesh.neumann_sides
    if len(ns):
        val -= float(np.sum(disc.g_h[ns] * v.dof[ns]
                            * mesh.side_lengths[ns]))
    return val


def discrete_dual_energy(y, data, mesh=None):
    """Discrete dual energy of an RT0 candidate.

    Raises Inadmissible unless the element divergences equal the reduced
    source (negated) and the Neumann traces equal the reduced flux.
    """
    mesh = mesh or y.mesh
    disc = data.reduce(mesh)
    div = spaces.rt_divergence(y)
    err = np.abs(div + disc.f_h).max() if mesh.n_elements else 0.0
    if err > _ADMISSIBLE_TOL * (1.0 + np.abs(disc.f_h).max(initial=0.0)):
        raise Inadmissible(f"dual candidate: divergence residual {err:.3e}")
    ns = mesh.neumann_sides
    if len(ns):
        nerr = np.abs(y.dof[ns] - disc.g_h[ns]).max()
        if nerr > _ADMISSIBLE_TOL * (1.0 + np.abs(disc.g_h[ns]).max()):
            raise Inadmissible(
                f"dual candidate: Neumann trace residual {nerr:.3e}")
    pw = spaces.rt_piecewise_average(y)
    val = -0.5 * float(np.sum(np.einsum("ij,ij->i", pw, pw) * mesh.areas))
    ins = mesh.insulated_sides
    if len(ins):
        val -= 0.5 * data.m * float(np.abs(y.dof[ins]).max()) ** 2
    ds = mesh.dirichlet_sides
    if len(ds):
        val += float(np.sum(mesh.side_lengths[ds] * y.dof[ds]
                            * disc.u_D_h[ds]))
    return val


def dirichlet_lift(data, mesh):
    """P1 lift of the Dirichlet trace: boundary data at Dirichlet-side
    vertices, zero at every other vertex."""
    vals = np.zeros(mesh.n_vertices)
    u_D = data.u_D_callable()
    for s in mesh.dirichlet_sides:
        for vtx in mesh.sides[s]:
            vals[vtx] = u_D(*mesh.vertices[vtx])
    return P1Function(mesh, vals)


def continuous_primal_energy(v, data, mesh=None):
    """Continuous primal energy of a conforming P1 candidate.

    The boundary L1 norm integrates |v| exactly by splitting each
    insulated side at its sign change; the source term uses the
    degree-5 element rule.
    """
    mesh = mesh or v.mesh
    vv = v.vertex_values
    u_D = data.u_D_callable()
    for s in mesh.dirichlet_sides:
        pts, _ = quad.segment_points(
            mesh.vertices[mesh.sides[s, 0]][None, :],
            mesh.vertices[mesh.sides[s, 1]][None, :])
        trace = spaces.p1_eval(v, np.array([mesh.side_elements[s, 0]]), pts)
        target = u_D(pts[..., 0], pts[..., 1])
        if np.abs(trace - target).max() > _ADMISSIBLE_TOL * (
                1.0 + np.abs(target).max()):
            raise Inadmissible("conforming candidate violates the "
                               "Dirichlet condition")
    grad = spaces.p1_gradient(v)
    val = 0.5 * float(np.sum(np.einsum("ij,ij->i", grad, grad) * mesh.areas))
    ins = mesh.insulated_sides
    a = vv[mesh.sides[ins, 0]]
    b = vv[mesh.sides[ins, 1]]
    l1 = float(np.sum(_segment_abs_integral(a, b, mesh.side_lengths[ins])))
    val += l1 ** 2 / (2.0 * data.m)
    coords = mesh.element_coords()
    pts, wts = quad.triangle_points(coords, quad.TRI_DEG5_BARY,
                                    quad.TRI_DEG5_WEIGHTS)
    fvals = data.f_callable()(pts[..., 0], pts[..., 1])
    vvals = spaces.p1_eval(v, np.arange(mesh.n_elements), pts)
    val -= float(np.sum(wts * fvals * vvals))
    nsides = mesh.neumann_sides
    if len(nsides):
        pa = mesh.vertices[mesh.sides[nsides, 0]]
        pb = mesh.vertices[mesh.sides[nsides, 1]]
        pts, wts = quad.segment_points(pa, pb)
        gvals = data.g_callable()(pts[..., 0], pts[..., 1])
        tvals = spaces.p1_eval(v, mesh.side_elements[nsides, 0], pts)
        val -= float(np.sum(wts * gvals * tvals))
    return val


def _require_constant_data(data):
    if data.f_constant is None or data.g_constant is None:
        raise Inadmissible(
            "continuous dual energy needs constant f and g; a non-constant "
            "source would require an admissible lift of the data error")


def rt_l2_norm_squared(y, mesh=None):
    """Exact squared L2 norm of an RT0 field (degree-2 rule)."""
    mesh = mesh or y.mesh
    coords = mesh.element_coords()
    pts, wts = quad.triangle_points(coords, quad.TRI_DEG2_BARY,
                                    quad.TRI_DEG2_WEIGHTS)
    vals = spaces.rt_eval(y, np.arange(mesh.n_elements), pts)
    return float(np.sum(wts * np.einsum("kqd,kqd->kq", vals, vals)))


def continuous_dual_energy(y, data, mesh=None):
    """Continuous dual energy of an RT0 flux for constant data.

    Admissibility (exact divergence and Neumann trace) is checked against
    the constant data values; the Dirichlet boundary terms are evaluated
    with the P1 lift of the Dirichlet trace.
    """
    mesh = mesh or y.mesh
    _require_constant_data(data)
    f_c, g_c = data.f_constant, data.g_constant
    div = spaces.rt_divergence(y)
    if np.abs(div + f_c).max() > _ADMISSIBLE_TOL * (1.0 + abs(f_c)):
        raise Inadmissible("continuous dual candidate: div y != -f")
    ns = mesh.neumann_sides
    if len(ns) and np.abs(y.dof[ns] - g_c).max() > _ADMISSIBLE_TOL * (
            1.0 + abs(g_c)):
        raise Inadmissible("continuous dual candidate: y.n != g on Neumann")
    val = -0.5 * rt_l2_norm_squared(y, mesh)
    ins = mesh.insulated_sides
    if len(ins):
        val -= 0.5 * data.m * float(np.abs(y.dof[ins]).max()) ** 2
    lift = dirichlet_lift(data, mesh)
    lv = lift.vertex_values
    if np.any(lv):
        bs = mesh.boundary_sides
        lift_int = mesh.side_lengths[bs] * 0.5 * (
            lv[mesh.sides[bs, 0]] + lv[mesh.sides[bs, 1]])
        val += float(np.sum(y.dof[bs] * lift_int))
        ins_mask = mesh.boundary_label[bs] == "I"
        val -= float(np.sum((y.dof[bs] * lift_int)[ins_mask]))
        neu_mask = mesh.boundary_label[bs] == "N"
        val -= g_c * float(np.sum(lift_int[neu_mask]))
    return val


class GapReport:
    """Primal-dual gap and its local indicators.

    element_indicators holds the unscaled flux-mismatch values per
    element; the one-half factor enters only the global sum.
    side_indicators holds the computable boundary indicators per
    insulated side (aligned with mesh.insulated_sides), each a perfect
    square and therefore nonnegative.
    """

    def __init__(self, element_indicators, side_indicators, primal_energy,
                 dual_energy):
        self.element_indicators = element_indicators
        self.side_indicators = side_indicators
        self.primal_energy = primal_energy
        self.dual_energy = dual_energy

    @property
    def eta2_A_global(self):
        return 0.5 * float(self.element_indicators.sum())

    @property
    def eta2_B_global(self):
        return float(self.side_indicators.sum())

    @property
    def gap(self):
        return self.primal_energy - self.dual_energy

    @property
    def estimator_total(self):
        return self.eta2_A_global + self.eta2_B_global

    def to_csv(self, path, mesh):
        with open(path, "w") as fh:
            fh.write("kind,index,value\n")
            for t, val in enumerate(self.element_indicators):
                fh.write(f"element,{t},{val!r}\n")
            for s, val in zip(mesh.insulated_sides, self.side_indicators):
                fh.write(f"side,{s},{val!r}\n")
            fh.write(f"summary,gap,{self.gap!r}\n")
            fh.write(f"summary,eta2_A,{self.eta2_A_global!r}\n")
            fh.write(f"summary,eta2_B,{self.eta2_B_global!r}\n")
            fh.write(f"summary,primal_energy,{self.primal_energy!r}\n")
            fh.write(f"summary,dual_energy,{self.dual_energy!r}\n")


def _side_indicator_values(m, traces, weighted_means):
    # perfect-square form keeps the values nonnegative in floating point
    return (m * traces + weighted_means) ** 2 / (2.0 * m)


def gap_report(v, y, data, mesh=None):
    """Discrete gap report for an admissible CR / RT0 pair."""
    mesh = mesh or v.mesh
    primal = discrete_primal_energy(v, data, mesh)
    dual = discrete_dual_energy(y, data, mesh)
    diff = spaces.cr_gradient(v) - spaces.rt_piecewise_average(y)
    eta_elem = np.einsum("ij,ij->i", diff, diff) * mesh.areas
    ins = mesh.insulated_sides
    eta_side = _side_indicator_values(
        data.m, y.dof[ins], mesh.side_lengths[ins] * v.dof[ins])
    return GapReport(eta_elem, eta_side, primal, dual)


def conforming_gap_report(v, y, data, mesh=None):
    """Continuous gap report for a conforming P1 / RT0 pair (constant
    data).  The element indicators compare the conforming gradient with
    the full flux field, not its element means."""
    mesh = mesh or v.mesh
    primal = continuous_primal_energy(v, data, mesh)
    dual = continuous_dual_energy(y, data, mesh)
    coords = mesh.element_coords()
    pts, wts = quad.triangle_points(coords, quad.TRI_DEG2_BARY,
                                    quad.TRI_DEG2_WEIGHTS)
    yvals = spaces.rt_eval(y, np.arange(mesh.n_elements), pts)
    diff = spaces.p1_gradient(v)[:, None, :] - yvals
    eta_elem = np.sum(wts * np.einsum("kqd,kqd->kq", diff, diff), axis=1)
    ins = mesh.insulated_sides
    vv = v.vertex_values
    means = 0.5 * (vv[mesh.sides[ins, 0]] + vv[mesh.sides[ins, 1]])
    eta_side = _side_indicator_values(
        data.m, y.dof[ins], mesh.side_lengths[ins] * means)
    return GapReport(eta_elem, eta_side, primal, dual)


def exact_boundary_term(v, y, data, mesh=None):
    """Exact boundary Fenchel-Young term of a pair, and its exact per-side
    indicator values (with the true L1 trace norms, not the side means).

    Works for CR or P1 primal candidates; always nonnegative globally.
    """
    mesh = mesh or y.mesh
    ins = mesh.insulated_sides
    if isinstance(v, CRFunction):
        ends = _cr_side_endpoint_values(v)[ins]
        side_means = v.dof[ins]
    else:
        ends = v.vertex_values[mesh.sides[ins]]
        side_means = 0.5 * (ends[:, 0] + ends[:, 1])
    lens = mesh.side_lengths[ins]
    traces = y.dof[ins]
    abs_int = _segment_abs_integral(ends[:, 0], ends[:, 1], lens)
    m = data.m
    per_side = 0.5 * m * traces ** 2 + traces * lens * side_means \
        + abs_int ** 2 / (2.0 * m)
    max_trace = float(np.abs(traces).max()) if len(ins) else 0.0
    l1 = float(abs_int.sum())
    total = 0.5 * m * max_trace ** 2 \
        + float(np.sum(traces * lens * side_means)) + l1 ** 2 / (2.0 * m)
    return total, per_side


class ErrorMeasures:
    def __init__(self, rho2_primal, rho2_dual):
        self.rho2_primal = rho2_primal
        self.rho2_dual = rho2_dual

    @property
    def rho2_total(self):
        return self.rho2_primal + self.rho2_dual


def strong_convexity_measures(v, y, reference, data, mesh=None):
    """Energy excesses of a pair relative to a reference optimal pair."""
    mesh = mesh or v.mesh
    u_star, z_star = reference
    rho_p = discrete_primal_energy(v, data, mesh) \
        - discrete_primal_energy(u_star, data, mesh)
    rho_d = -discrete_dual_energy(y, data, mesh) \
        + discrete_dual_energy(z_star, data, mesh)
    return ErrorMeasures(rho_p, rho_d)


def apriori_identity_check(mesh, u, z, data, reference=None):
    """Both sides of the interpolant error identity, computed independently.

    The left side is the total energy excess of the canonical CR / RT0
    interpolants of (u, z) relative to the discrete optimal pair (solved
    here unless one is supplied).  The right side combines projection
    defects of the exact pair, with boundary integrals by high-order
    quadrature on the polygonal boundary.  Returns (lhs, rhs, mismatch).
    """
    u_cr = spaces.cr_interpolate(u, mesh)
    z_rt = spaces.rt_interpolate(z, mesh)
    if reference is None:
        from . import solver as _solver
        z_star, it, _ = _solver.solve_dual(mesh, data)
        disc = data.reduce(mesh)
        u_star = _solver.marini_reconstruct(
            z_star, it.U_bar,
            dirichlet={int(s): disc.u_D_h[s] for s in mesh.dirichlet_sides})
    else:
        u_star, z_star = reference
    lhs = strong_convexity_measures(u_cr, z_rt, (u_star, z_star), data,
                                    mesh).rho2_total

    m = data.m
    # element-mean defect of the flux
    z_mean = spaces.element_mean_vector(z, mesh, degree=20)
    zi_mean = spaces.rt_piecewise_average(z_rt)
    d = z_mean - zi_mean
    term1 = 0.5 * float(np.sum(np.einsum("ij,ij->i", d, d) * mesh.areas))

    ins = mesh.insulated_sides
    a_pts = mesh.vertices[mesh.sides[ins, 0]]
    b_pts = mesh.vertices[mesh.sides[ins, 1]]
    pts, wts = quad.segment_points(a_pts, b_pts, n=24)
    zx, zy = z(pts[..., 0], pts[..., 1])
    normals = mesh.side_normals[ins]
    zn = zx * normals[:, 0, None] + zy * normals[:, 1, None]
    uvals = u(pts[..., 0], pts[..., 1])
    lens = mesh.side_lengths[ins]
    zn_mean = (wts * zn).sum(axis=1) / lens
    u_mean = (wts * uvals).sum(axis=1) / lens
    # (pi(z.n) - z.n, u - pi(u))_S = |S| mean(z.n) mean(u) - int_S z.n u
    term2 = float(np.sum(lens * zn_mean * u_mean
                         - (wts * zn * uvals).sum(axis=1)))
    max_mean = float(np.abs(zn_mean).max())
    # sup of |z.n| over the polygonal boundary: quadrature points plus
    # side endpoints
    ex, ey = z(np.c_[a_pts[:, 0], b_pts[:, 0]],
               np.c_[a_pts[:, 1], b_pts[:, 1]])
    zn_ends = ex * normals[:, 0, None] + ey * normals[:, 1, None]
    max_exact = max(float(np.abs(zn).max()), float(np.abs(zn_ends).max()))
    term3 = 0.5 * m * (max_mean ** 2 - max_exact ** 2)
    l1_mean = float(np.sum(lens * np.abs(u_mean)))
    l1_exact = float(np.sum((wts * np.abs(uvals)).sum(axis=1)))
    term4 = (l1_mean ** 2 - l1_exact ** 2) / (2.0 * m)
    rhs = term1 + term2 + term3 + term4
    return lhs, rhs, abs(lhs - rhs)


def distribution(u, m, mesh=None):
    """Material distribution on insulated sides: m-normalized absolute
    side means of the primal trace."""
    mesh = mesh or u.mesh
    ins = mesh.insulated_sides
    l1 = float(np.sum(mesh.side_lengths[ins] * np.abs(u.dof[ins])))
    if l1 <= 0.0:
        raise DegenerateTrace("insulated trace has zero L1 norm")
    return m / l1 * np.abs(u.dof[ins])


def eoc(values, sizes):
    """Experimental orders of convergence between consecutive entries."""
    values = np.asarray(values, dtype=float)
    sizes = np.asarray(sizes, dtype=float)
    if np.any(values <= 0.0) or np.any(sizes <= 0.0):
        raise ValueError("eoc needs positive values and sizes")
    return np.log(values[1:] / values[:-1]) / np.log(sizes[1:] / sizes[:-1])
