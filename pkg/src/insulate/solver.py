"""Primal-dual active-set semi-smooth Newton solver for the dual program,
optimality verification, and the inverse generalized Marini reconstruction
of the primal solution.
"""

import numpy as np

from . import assembly
from . import sparse_linalg as sla
from . import spaces
from .spaces import CRFunction, ElementwiseAffine


class JumpViolation(RuntimeError):
    """Side means of the reconstructed primal candidate disagree across an
    interior side; the input pair does not satisfy the optimality system."""


class ActiveSets:
    """Index sets of insulated sides where the lower (plus) or upper
    (minus) trace bound is guessed active."""

    def __init__(self, plus, minus):
        self.plus = np.asarray(plus, dtype=bool)
        self.minus = np.asarray(minus, dtype=bool)

    def __eq__(self, other):
        if not isinstance(other, ActiveSets):
            return NotImplemented
        return (np.array_equal(self.plus, other.plus)
                and np.array_equal(self.minus, other.minus))

    def counts(self):
        return int(self.plus.sum()), int(self.minus.sum())


class KktIterate:
    """One iterate of the optimality system.

    Z : shifted flux coefficients over non-Neumann sides
    U_bar : element multipliers (means of the primal solution at optimum)
    mu : epigraph variable for the max-norm of the insulated trace
    Lambda_plus, Lambda_minus : insulated-side multipliers
    """

    def __init__(self, Z, U_bar, mu, Lambda_plus, Lambda_minus):
        self.Z = Z
        self.U_bar = U_bar
        self.mu = float(mu)
        self.Lambda_plus = Lambda_plus
        self.Lambda_minus = Lambda_minus

    @classmethod
    def zeros(cls, n_dof, n_elements, n_insulated):
        return cls(np.zeros(n_dof), np.zeros(n_elements), 0.0,
                   np.zeros(n_insulated), np.zeros(n_insulated))


class SolverReport:
    def __init__(self, iterations, converged, exact_termination,
                 final_step_norm, kkt_residuals, history):
        self.iterations = iterations
        self.converged = converged
        self.exact_termination = exact_termination
        self.final_step_norm = final_step_norm
        self.kkt_residuals = kkt_residuals
        self.history = history

    def history_csv(self, path):
        """Iteration log: k, active set sizes, step norm, mu, dual energy."""
        with open(path, "w") as fh:
            fh.write("k,n_active_plus,n_active_minus,step_norm,mu,"
                     "dual_energy\n")
            for row in self.history:
                fh.write(",".join(repr(x) for x in row) + "\n")


def compute_active_sets(it, mats, alpha):
    """Active-set update: side i joins a set when multiplier plus alpha
    times the (scaled) constraint value is negative; ties stay inactive."""
    t = it.Z[mats.insulated_rows]
    plus = it.Lambda_plus + alpha * (it.mu + t) < 0.0
    minus = it.Lambda_minus + alpha * (it.mu - t) < 0.0
    return ActiveSets(plus, minus)


def _newton_matrix(mats, sets, m, alpha):
    n_dof = mats.n_dof
    n_el = mats.B.shape[1]
    n_i = len(mats.insulated_rows)
    rows = np.arange(n_i)
    T_I = sla.SparseMatrix.from_coo(
        rows, mats.insulated_rows, np.ones(n_i), (n_i, n_dof))
    TM = sla.SparseMatrix.from_coo(
        rows, mats.insulated_rows, mats.M_I, (n_i, n_dof))
    off_mu = n_dof + n_el
    off_p = off_mu + 1
    off_m = off_p + n_i
    dim = off_m + n_i

    def diag(mask, value=1.0):
        idx = np.flatnonzero(mask)
        return sla.SparseMatrix.from_coo(
            idx, idx, np.full(len(idx), value), (n_i, n_i))

    blocks = [
        (0, 0, mats.A),
        (0, n_dof, mats.B),
        (n_dof, 0, mats.B, 1.0, True),
        (0, off_p, TM, 1.0, True),
        (0, off_m, TM, -1.0, True),
        (off_mu, off_mu, sla.SparseMatrix.from_dense([[m]])),
        (off_mu, off_p, sla.SparseMatrix.from_dense(
            mats.Mtilde_I[None, :])),
        (off_mu, off_m, sla.SparseMatrix.from_dense(
            mats.Mtilde_I[None, :])),
        # active rows enforce mu +/- trace = 0, inactive rows zero the
        # multiplier, exactly as in the semi-smooth Newton step
        (off_p, 0, _mask_rows(T_I, sets.plus), -alpha),
        (off_p, off_mu, _mask_column(sets.plus), -alpha),
        (off_p, off_p, diag(~sets.plus)),
        (off_m, 0, _mask_rows(T_I, sets.minus), alpha),
        (off_m, off_mu, _mask_column(sets.minus), -alpha),
        (off_m, off_m, diag(~sets.minus)),
    ]
    return sla.block_compose(blocks, (dim, dim)), (off_mu, off_p, off_m, dim)


def _mask_rows(matrix, mask):
    idx = np.flatnonzero(mask)
    n = len(mask)
    sel = sla.SparseMatrix.from_coo(idx, idx, np.ones(len(idx)), (n, n))
    return sla.SparseMatrix(sel.to_scipy() @ matrix.to_scipy())


def _mask_column(mask):
    idx = np.flatnonzero(mask)
    return sla.SparseMatrix.from_coo(
        idx, np.zeros(len(idx), dtype=int), np.ones(len(idx)),
        (len(mask), 1))


def newton_step(mats, vecs, sets, m, alpha=1.0):
    """Solve the linearized optimality system for the given active sets."""
    matrix, (off_mu, off_p, off_m, dim) = _newton_matrix(mats, sets, m, alpha)
    rhs = np.zeros(dim)
    n_dof = mats.n_dof
    rhs[:n_dof] = vecs.rhs_stationarity
    rhs[n_dof:off_mu] = -vecs.F_g
    x = sla.solve_direct(matrix, rhs)
    n_el = mats.B.shape[1]
    return KktIterate(x[:n_dof], x[n_dof:n_dof + n_el], x[off_mu],
                      x[off_p:off_m], x[off_m:])


def verify_kkt(it, mats, vecs, m):
    """Max-norm residuals of every optimality condition (pure report)."""
    A = mats.A.to_scipy()
    B = mats.B.to_scipy()
    t = it.Z[mats.insulated_rows]
    lam_term = np.zeros(mats.n_dof)
    lam_term[mats.insulated_rows] = mats.M_I * (it.Lambda_plus
                                                - it.Lambda_minus)
    r_stat = A @ it.Z + B @ it.U_bar + lam_term - vecs.rhs_stationarity
    r_div = B.T @ it.Z + vecs.F_g
    r_mu = m * it.mu + mats.Mtilde_I @ (it.Lambda_plus + it.Lambda_minus)

    def vmax(v):
        return float(np.abs(v).max()) if np.size(v) else 0.0

    return {
        "stationarity": vmax(r_stat),
        "divergence": vmax(r_div),
        "mu_equation": abs(float(r_mu)),
        "multiplier_sign": vmax(np.maximum(it.Lambda_plus, 0.0))
        + vmax(np.maximum(it.Lambda_minus, 0.0)),
        "constraint": max(vmax(np.maximum(-(it.mu + t), 0.0)),
                          vmax(np.maximum(-(it.mu - t), 0.0))),
        "complementarity": max(vmax(it.Lambda_plus * (it.mu + t)),
                               vmax(it.Lambda_minus * (it.mu - t))),
    }


def _dual_energy_value(mesh, mats, vecs, data, Z):
    """Smooth part of the discrete dual energy of the current iterate,
    for the iteration log only (no admissibility checks)."""
    z = assembly.total_flux(mesh, mats, vecs, Z)
    pw = spaces.rt_piecewise_average(z)
    val = -0.5 * float(np.sum(np.einsum("ij,ij->i", pw, pw) * mesh.areas))
    ins = mesh.insulated_sides
    if len(ins):
        val -= 0.5 * data.m * float(np.abs(z.dof[ins]).max()) ** 2
    ds = mesh.dirichlet_sides
    if len(ds):
        val += float(np.sum(mesh.side_lengths[ds] * z.dof[ds]
                            * vecs.discrete.u_D_h[ds]))
    return val


def solve_dual(mesh, data, alpha=1.0, eps_stop=1e-10, max_iter=100):
    """Run the primal-dual active-set iteration from the zero iterate.

    Returns (z, iterate, report) with z the total flux.  The iteration
    stops when the active sets repeat (the last solve then satisfies the
    full optimality system exactly) or when the flux update drops below
    eps_stop; it gives up after max_iter steps with converged=False.
    """
    if alpha <= 0.0 or eps_stop <= 0.0 or max_iter < 1:
        raise ValueError("need alpha > 0, eps_stop > 0, max_iter >= 1")
    mats, vecs = assembly.assemble(mesh, data)
    it = KktIterate.zeros(mats.n_dof, mesh.n_elements,
                          len(mats.insulated_rows))
    sets = compute_active_sets(it, mats, alpha)
    history = []
    converged = False
    exact = False
    step_norm = np.inf
    iterations = 0
    last_energy = -np.inf
    for _ in range(max_iter):
        new_it = newton_step(mats, vecs, sets, data.m, alpha)
        step_norm = float(np.abs(new_it.Z - it.Z).max()) \
            if mats.n_dof else 0.0
        it = new_it
        iterations += 1
        energy = _dual_energy_value(mesh, mats, vecs, data, it.Z)
        if energy < last_energy - 1e-12 * (1.0 + abs(energy)):
            # not guaranteed by the method; informational only
            import warnings
            warnings.warn("dual energy decreased across an active-set step",
                          RuntimeWarning, stacklevel=2)
        last_energy = energy
        np_, nm = sets.counts()
        history.append((iterations, np_, nm, step_norm, it.mu, energy))
        new_sets = compute_active_sets(it, mats, alpha)
        if new_sets == sets:
            # the solved system already enforces the optimality conditions
            # for its own active-set guess
            converged = True
            exact = True
            break
        sets = new_sets
        if step_norm <= eps_stop:
            converged = True
            break
    residuals = verify_kkt(it, mats, vecs, data.m)
    report = SolverReport(iterations, converged, exact, step_norm,
                          residuals, history)
    z = assembly.total_flux(mesh, mats, vecs, it.Z)
    return z, it, report


def marini_reconstruct(z, u_bar, dirichlet=None, tol=1e-9):
    """Primal solution from the dual flux and its element multipliers.

    The element-wise candidate is u_bar + (mean flux) . (x - barycenter);
    its side means from the two adjacent elements must agree (checked to
    tol, else JumpViolation), and when a Dirichlet side -> value mapping
    is supplied the boundary means must match it.
    """
    mesh = z.mesh
    aff = ElementwiseAffine(mesh, np.asarray(u_bar, dtype=float),
                            spaces.rt_piecewise_average(z))
    means = aff.side_means()
    interior = mesh.side_elements[:, 1] >= 0
    mismatch = np.abs(means[interior, 1] - means[interior, 0])
    scale = 1.0 + float(np.abs(aff.value).max(initial=0.0))
    if mismatch.size and mismatch.max() > tol * scale:
        s = np.flatnonzero(interior)[int(np.argmax(mismatch))]
        raise JumpViolation(
            f"side means differ by {mismatch.max():.3e} across side {s}; "
            "the flux/multiplier pair is not optimal")
    dof = means[:, 0].copy()
    dof[interior] = 0.5 * (means[interior, 0] + means[interior, 1])
    if dirichlet is not None:
        for s, value in dirichlet.items():
            if abs(dof[s] - value) > tol * (1.0 + abs(value)):
                raise JumpViolation(
                    f"Dirichlet side {s} mean {dof[s]!r} does not match "
                    f"the prescribed value {value!r}")
    return CRFunction(mesh, dof)
