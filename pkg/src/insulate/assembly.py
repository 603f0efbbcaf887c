"""Algebraic blocks and data vectors of the dual quadratic program.

The dual unknowns are the normal-trace coefficients of the shifted flux
on all sides that are not Neumann; Neumann dofs are eliminated through a
lifting field that carries the prescribed flux and vanishes on every
other side.
"""

import numpy as np

from . import sparse_linalg as sla
from . import spaces
from .mesh import NEUMANN
from .spaces import RT0Function


class IncompatibleProblem(ValueError):
    """Problem data admits no admissible dual flux."""


class ProblemData:
    """Continuous data of the insulation problem and its reductions.

    Parameters
    ----------
    m : positive float, amount of insulating material
    f : source term; scalar constant or callable f(x, y)
    g : Neumann flux; scalar constant or callable
    u_D : Dirichlet trace; scalar constant or callable

    A problem without insulated boundary is rejected at reduction time.
    """

    def __init__(self, m, f=0.0, g=0.0, u_D=0.0):
        if m <= 0.0:
            raise ValueError("material amount m must be positive")
        self.m = float(m)
        self.f = f
        self.g = g
        self.u_D = u_D

    @property
    def f_constant(self):
        return None if callable(self.f) else float(self.f)

    @property
    def g_constant(self):
        return None if callable(self.g) else float(self.g)

    @property
    def u_D_constant(self):
        return None if callable(self.u_D) else float(self.u_D)

    def f_callable(self):
        if callable(self.f):
            return self.f
        c = float(self.f)
        return lambda x, y: np.full_like(np.asarray(x, dtype=float), c)

    def g_callable(self):
        if callable(self.g):
            return self.g
        c = float(self.g)
        return lambda x, y: np.full_like(np.asarray(x, dtype=float), c)

    def u_D_callable(self):
        if callable(self.u_D):
            return self.u_D
        c = float(self.u_D)
        return lambda x, y: np.full_like(np.asarray(x, dtype=float), c)

    def reduce(self, mesh):
        """Discrete reductions (element means of f, side means of g, u_D)."""
        if len(mesh.insulated_sides) == 0:
            raise IncompatibleProblem(
                "no insulated boundary part; the problem requires one")
        f_h = spaces.element_mean(self.f_callable(), mesh)
        g_h = np.zeros(mesh.n_sides)
        if len(mesh.neumann_sides):
            g_h[mesh.neumann_sides] = spaces.side_mean_fn(
                self.g_callable(), mesh, mesh.neumann_sides)
        u_D_h = np.zeros(mesh.n_sides)
        if len(mesh.dirichlet_sides):
            u_D_h[mesh.dirichlet_sides] = spaces.side_mean_fn(
                self.u_D_callable(), mesh, mesh.dirichlet_sides)
        return DiscreteData(f_h, g_h, u_D_h)


class DiscreteData:
    """Element means of f and side means of g and u_D (full-length arrays,
    nonzero only on the labeled sides)."""

    def __init__(self, f_h, g_h, u_D_h):
        self.f_h = f_h
        self.g_h = g_h
        self.u_D_h = u_D_h


class KktMatrices:
    """Matrix blocks of the dual optimality system.

    A : (n_dof, n_dof) Gram matrix of the element-mean projections of the
        unit-trace basis fields over non-Neumann sides
    B : (n_dof, n_elements) divergence pairings (div psi_i, chi_T)
    M_I : (n_ins,) diagonal of the insulated side mass matrix (|S|)
    Mtilde_I : (n_ins,) row vector (|S|) pairing multipliers with constants
    dual_sides : side index of every dual dof
    side_to_dof : (n_sides,) position in the dof vector, -1 on Neumann sides
    insulated_rows, dirichlet_rows : dof positions of those boundary sides
    """

    def __init__(self, A, B, M_I, Mtilde_I, dual_sides, side_to_dof,
                 insulated_rows, dirichlet_rows):
        self.A = A
        self.B = B
        self.M_I = M_I
        self.Mtilde_I = Mtilde_I
        self.dual_sides = dual_sides
        self.side_to_dof = side_to_dof
        self.insulated_rows = insulated_rows
        self.dirichlet_rows = dirichlet_rows

    @property
    def n_dof(self):
        return len(self.dual_sides)


class DataVectors:
    """Right-hand side data of the shifted optimality system, together
    with the discrete data reductions used to build it."""

    def __init__(self, F_g, Z_g, U_D, z_g, rhs_stationarity, discrete):
        self.F_g = F_g
        self.Z_g = Z_g
        self.U_D = U_D
        self.z_g = z_g
        self.rhs_stationarity = rhs_stationarity
        self.discrete = discrete


def _basis_mean_table(mesh):
    """Element means of the three local unit-trace basis fields,
    shape (ne, 3, 2)."""
    coords = mesh.element_coords()
    out = np.empty((mesh.n_elements, 3, 2))
    for j in range(3):
        s = mesh.element_sides[:, j]
        scale = (mesh.element_side_signs[:, j] * mesh.side_lengths[s]
                 / (2.0 * mesh.areas))
        out[:, j] = scale[:, None] * (mesh.barycenters
                                      - coords[:, (j + 2) % 3])
    return out


def assemble(mesh, data):
    """Assemble the matrix blocks and data vectors on a mesh.

    Returns (KktMatrices, DataVectors).  The lifting z_g carries the
    reduced Neumann flux and is zero on every other dof.
    """
    disc = data.reduce(mesh)
    neumann = np.zeros(mesh.n_sides, dtype=bool)
    neumann[mesh.neumann_sides] = True
    dual_sides = np.flatnonzero(~neumann)
    side_to_dof = np.full(mesh.n_sides, -1, dtype=np.int64)
    side_to_dof[dual_sides] = np.arange(len(dual_sides))
    n_dof = len(dual_sides)

    means = _basis_mean_table(mesh)
    rows, cols, vals = [], [], []
    brows, bcols, bvals = [], [], []
    for j in range(3):
        sj = mesh.element_sides[:, j]
        dj = side_to_dof[sj]
        # divergence pairings (div psi, chi_T) = sign * |S|
        keep = dj >= 0
        brows.append(dj[keep])
        bcols.append(np.flatnonzero(keep))
        bvals.append((mesh.element_side_signs[:, j]
                      * mesh.side_lengths[sj])[keep])
        for k in range(3):
            sk = mesh.element_sides[:, k]
            dk = side_to_dof[sk]
            ok = (dj >= 0) & (dk >= 0)
            rows.append(dj[ok])
            cols.append(dk[ok])
            vals.append((np.einsum("ij,ij->i", means[:, j], means[:, k])
                         * mesh.areas)[ok])
    A = sla.SparseMatrix.from_coo(
        np.concatenate(rows), np.concatenate(cols), np.concatenate(vals),
        (n_dof, n_dof))
    B = sla.SparseMatrix.from_coo(
        np.concatenate(brows), np.concatenate(bcols), np.concatenate(bvals),
        (n_dof, mesh.n_elements))

    ins = mesh.insulated_sides
    M_I = mesh.side_lengths[ins].copy()
    Mtilde_I = M_I.copy()
    insulated_rows = side_to_dof[ins]
    dirichlet_rows = side_to_dof[mesh.dirichlet_sides]

    z_g = RT0Function(mesh, disc.g_h.copy())
    div_zg = spaces.rt_divergence(z_g)
    F_g = (disc.f_h + div_zg) * mesh.areas
    zg_mean = spaces.rt_piecewise_average(z_g)
    Z_g = np.zeros(n_dof)
    for j in range(3):
        sj = mesh.element_sides[:, j]
        dj = side_to_dof[sj]
        keep = dj >= 0
        contrib = (np.einsum("ij,ij->i", zg_mean, means[:, j])
                   * mesh.areas)[keep]
        np.add.at(Z_g, dj[keep], contrib)

    U_D = (disc.u_D_h * mesh.side_lengths)[mesh.dirichlet_sides]
    rhs = -Z_g
    rhs[dirichlet_rows] += U_D

    mats = KktMatrices(A, B, M_I, Mtilde_I, dual_sides, side_to_dof,
                       insulated_rows, dirichlet_rows)
    vecs = DataVectors(F_g, Z_g, U_D, z_g, rhs, disc)
    return mats, vecs


def check_compatibility(mesh, data, tol=1e-10):
    """Check that the divergence constraint admits a solution.

    Returns a dict with keys 'consistent' and 'residual'.  Raises
    IncompatibleProblem when there is no insulated boundary.
    """
    mats, vecs = assemble(mesh, data)
    import scipy.sparse.linalg as spla
    Bt = mats.B.to_scipy().T
    sol = spla.lsqr(Bt, -vecs.F_g, atol=1e-14, btol=1e-14)[0]
    residual = float(np.linalg.norm(Bt @ sol + vecs.F_g, np.inf))
    scale = 1.0 + float(np.linalg.norm(vecs.F_g, np.inf))
    return {"consistent": residual <= tol * scale, "residual": residual}


def total_flux(mesh, mats, vecs, Z):
    """Recombine shifted coefficients and lifting into the full flux."""
    dof = vecs.z_g.dof.copy()
    dof[mats.dual_sides] += Z
    return RT0Function(mesh, dof)
