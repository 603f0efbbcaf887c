"""Crouzeix-Raviart and lowest-order Raviart-Thomas function spaces.

A CR function stores one real per side (the side mean of the trace) and
is element-wise affine.  An RT0 function stores one real per side (the
constant value of the normal trace against the mesh's side normal).
Piecewise constants are plain numpy arrays of length n_elements.  All
evaluation routines are pure; function values are immutable by
convention.
"""

import numpy as np

from . import quadrature as quad


class CRFunction:
    """Element-wise affine, continuous in side means only.

    dof[s] is the mean of the function over side s.
    """

    def __init__(self, mesh, dof):
        self.mesh = mesh
        self.dof = np.asarray(dof, dtype=float)
        if self.dof.shape != (mesh.n_sides,):
            raise ValueError("CR dof vector must have one entry per side")

    def copy(self):
        return CRFunction(self.mesh, self.dof.copy())


class RT0Function:
    """Lowest-order Raviart-Thomas field.

    dof[s] is the constant normal trace y . n_S on side s, with n_S the
    side normal stored on the mesh (basis normalized to unit traces).
    """

    def __init__(self, mesh, dof):
        self.mesh = mesh
        self.dof = np.asarray(dof, dtype=float)
        if self.dof.shape != (mesh.n_sides,):
            raise ValueError("RT0 dof vector must have one entry per side")

    def copy(self):
        return RT0Function(self.mesh, self.dof.copy())


class P1Function:
    """Globally continuous piecewise affine function, one value per vertex."""

    def __init__(self, mesh, vertex_values):
        self.mesh = mesh
        self.vertex_values = np.asarray(vertex_values, dtype=float)
        if self.vertex_values.shape != (mesh.n_vertices,):
            raise ValueError("P1 value vector must have one entry per vertex")


class ElementwiseAffine:
    """Element-wise affine data v|_T(x) = value[T] + gradient[T] . (x - x_T),
    with x_T the barycenter.  Used as the common evaluation form of CR
    functions and of the primal reconstruction."""

    def __init__(self, mesh, value, gradient):
        self.mesh = mesh
        self.value = np.asarray(value, dtype=float)
        self.gradient = np.asarray(gradient, dtype=float)

    def eval(self, elements, points):
        """Evaluate on given elements at points of shape (k, q, 2)."""
        d = points - self.mesh.barycenters[elements][:, None, :]
        return self.value[elements][:, None] + np.einsum(
            "kd,kqd->kq", self.gradient[elements], d)

    def side_means(self):
        """Side means from both adjacent elements, shape (ns, 2).

        Column 0 is the trace mean from the minus element, column 1 from
        the plus element (nan where there is none).  Exact for affine
        functions: the mean over a straight side is the midpoint value.
        """
        mesh = self.mesh
        out = np.full((mesh.n_sides, 2), np.nan)
        for col in (0, 1):
            t = mesh.side_elements[:, col]
            ok = t >= 0
            d = mesh.side_midpoints[ok] - mesh.barycenters[t[ok]]
            out[ok, col] = self.value[t[ok]] + np.einsum(
                "kd,kd->k", self.gradient[t[ok]], d)
        return out


def _barycentric_gradients(mesh):
    """Gradients of the three barycentric coordinates, shape (ne, 3, 2)."""
    coords = mesh.element_coords()
    grads = np.empty((mesh.n_elements, 3, 2))
    for j in range(3):
        # opposite edge of vertex j, rotated into the inward normal
        a = coords[:, (j + 1) % 3]
        b = coords[:, (j + 2) % 3]
        e = b - a
        grads[:, j, 0] = -e[:, 1]
        grads[:, j, 1] = e[:, 0]
    grads /= (2.0 * mesh.areas)[:, None, None]
    return grads


def cr_gradient(v):
    """Element-wise gradient of a CR function, shape (ne, 2).

    The CR basis function of side s is 1 - 2 lambda_j with lambda_j the
    barycentric coordinate of the vertex opposite s.
    """
    mesh = v.mesh
    lam = _barycentric_gradients(mesh)
    dofs = v.dof[mesh.element_sides]          # (ne, 3), local side j
    grad = np.zeros((mesh.n_elements, 2))
    for j in range(3):
        # local side j connects vertices j and j+1; opposite vertex j+2
        grad += dofs[:, j, None] * (-2.0) * lam[:, (j + 2) % 3]
    return grad


def cr_element_means(v):
    """Element means of a CR function (the piecewise constant projection)."""
    return v.dof[v.mesh.element_sides].mean(axis=1)


def cr_to_affine(v):
    return ElementwiseAffine(v.mesh, cr_element_means(v), cr_gradient(v))


def rt_divergence(y):
    """Element-wise divergence via the divergence theorem, shape (ne,)."""
    mesh = y.mesh
    dofs = y.dof[mesh.element_sides]
    lens = mesh.side_lengths[mesh.element_sides]
    return (mesh.element_side_signs * dofs * lens).sum(axis=1) / mesh.areas


def rt_piecewise_average(y):
    """Element means of an RT0 field, shape (ne, 2).

    Exact: the mean of an affine field is its barycenter value."""
    mesh = y.mesh
    out = np.zeros((mesh.n_elements, 2))
    coords = mesh.element_coords()
    for j in range(3):
        s = mesh.element_sides[:, j]
        # basis field of side s on T: sign * |S| / (2|T|) (x - p_opp)
        p_opp = coords[:, (j + 2) % 3]
        scale = (mesh.element_side_signs[:, j] * mesh.side_lengths[s]
                 / (2.0 * mesh.areas))
        out += (y.dof[s] * scale)[:, None] * (mesh.barycenters - p_opp)
    return out


def rt_eval(y, elements, points):
    """Evaluate an RT0 field on given elements at points (k, q, 2)."""
    mesh = y.mesh
    avg = rt_piecewise_average(y)[elements]
    div = rt_divergence(y)[elements]
    d = points - mesh.barycenters[elements][:, None, :]
    return avg[:, None, :] + 0.5 * div[:, None, None] * d


def side_mean_fn(g, mesh, sides=None, n=5):
    """Side means of a scalar function by Gauss quadrature."""
    if sides is None:
        sides = np.arange(mesh.n_sides)
    sides = np.asarray(sides)
    a = mesh.vertices[mesh.sides[sides, 0]]
    b = mesh.vertices[mesh.sides[sides, 1]]
    pts, wts = quad.segment_points(a, b, n)
    vals = g(pts[..., 0], pts[..., 1])
    return (wts * vals).sum(axis=1) / mesh.side_lengths[sides]


def element_mean(f, mesh, degree=5):
    """Element means of a scalar function.

    degree 5 uses the fixed assembly rule; larger degrees switch to a
    tensor rule of that order for oracle-grade accuracy.
    """
    coords = mesh.element_coords()
    if degree <= 5:
        bary, w = quad.TRI_DEG5_BARY, quad.TRI_DEG5_WEIGHTS
    else:
        bary, w = quad.triangle_rule_tensor(degree)
    pts, wts = quad.triangle_points(coords, bary, w)
    vals = f(pts[..., 0], pts[..., 1])
    return (wts * vals).sum(axis=1) / mesh.areas


def element_mean_vector(g, mesh, degree=5):
    """Element means of a vector field, shape (ne, 2)."""
    coords = mesh.element_coords()
    if degree <= 5:
        bary, w = quad.TRI_DEG5_BARY, quad.TRI_DEG5_WEIGHTS
    else:
        bary, w = quad.triangle_rule_tensor(degree)
    pts, wts = quad.triangle_points(coords, bary, w)
    gx, gy = g(pts[..., 0], pts[..., 1])
    return np.stack([(wts * gx).sum(axis=1) / mesh.areas,
                     (wts * gy).sum(axis=1) / mesh.areas], axis=1)


def cr_interpolate(f, mesh):
    """Canonical CR interpolant: dofs are the side means of f."""
    return CRFunction(mesh, side_mean_fn(f, mesh))


def rt_interpolate(g, mesh):
    """Canonical RT0 interpolant: dofs are the side means of g . n_S."""
    sides = np.arange(mesh.n_sides)
    a = mesh.vertices[mesh.sides[sides, 0]]
    b = mesh.vertices[mesh.sides[sides, 1]]
    pts, wts = quad.segment_points(a, b, 5)
    gx, gy = g(pts[..., 0], pts[..., 1])
    vals = gx * mesh.side_normals[sides, 0, None] \
        + gy * mesh.side_normals[sides, 1, None]
    return RT0Function(mesh, (wts * vals).sum(axis=1) / mesh.side_lengths)


def side_mean(v, side):
    """Side mean of a CR function: the stored degree of freedom."""
    return float(v.dof[side])


def jump_mean(aff, side):
    """Mean over an interior side of (trace from plus - trace from minus).

    Accepts an ElementwiseAffine or a CRFunction; for a valid CR function
    the value vanishes up to roundoff."""
    if isinstance(aff, CRFunction):
        aff = cr_to_affine(aff)
    mesh = aff.mesh
    t_minus, t_plus = mesh.side_elements[side]
    if t_plus < 0:
        raise ValueError("jump_mean needs an interior side")
    means = aff.side_means()[side]
    return float(means[1] - means[0])


def node_average(v, dirichlet=None):
    """Node-averaging interpolation of a CR function into P1.

    Each vertex gets the arithmetic mean of the affine element
    reconstructions at that vertex over the adjacent elements.  When a
    side -> value mapping is given, vertices lying on those (Dirichlet)
    sides are overwritten with the mean of the adjacent prescribed side
    values, which makes the result admissible for the primal problem.
    """
    mesh = v.mesh
    aff = cr_to_affine(v)
    coords = mesh.element_coords()
    d = coords - mesh.barycenters[:, None, :]
    vals = aff.value[:, None] + np.einsum("kd,kjd->kj", aff.gradient, d)
    acc = np.zeros(mesh.n_vertices)
    cnt = np.zeros(mesh.n_vertices)
    np.add.at(acc, mesh.elements.ravel(), vals.ravel())
    np.add.at(cnt, mesh.elements.ravel(), 1.0)
    out = acc / cnt
    if dirichlet is not None:
        dacc = np.zeros(mesh.n_vertices)
        dcnt = np.zeros(mesh.n_vertices)
        for s, value in dirichlet.items():
            for vtx in mesh.sides[s]:
                dacc[vtx] += value
                dcnt[vtx] += 1.0
        on_d = dcnt > 0
        out[on_d] = dacc[on_d] / dcnt[on_d]
    return P1Function(mesh, out)


def p1_to_cr(p):
    """Embed a P1 function into CR: side dofs are the side means."""
    mesh = p.mesh
    dof = 0.5 * (p.vertex_values[mesh.sides[:, 0]]
                 + p.vertex_values[mesh.sides[:, 1]])
    return CRFunction(mesh, dof)


def p1_gradient(p):
    """Element-wise gradient of a P1 function, shape (ne, 2)."""
    mesh = p.mesh
    lam = _barycentric_gradients(mesh)
    vals = p.vertex_values[mesh.elements]
    return np.einsum("kj,kjd->kd", vals, lam)


def p1_eval(p, elements, points):
    mesh = p.mesh
    grad = p1_gradient(p)[elements]
    anchor = mesh.vertices[mesh.elements[elements, 0]]
    base = p.vertex_values[mesh.elements[elements, 0]]
    d = points - anchor[:, None, :]
    return base[:, None] + np.einsum("kd,kqd->kq", grad, d)
