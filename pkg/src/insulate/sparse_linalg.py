"""Minimal sparse kernel: CSR matrices, block composition, direct solves.

Storage and factorization are delegated to scipy (SuperLU with partial
pivoting); the module owns the interface so the rest of the package does
not depend on scipy directly.
"""

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

_PIVOT_TOL = 1e-14


class SingularMatrixError(RuntimeError):
    """Factorization hit a pivot below tolerance.

    The index attribute reports the failing pivot position when known.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class SparseMatrix:
    """Compressed sparse row matrix with sorted, unique column indices."""

    def __init__(self, csr):
        csr = sp.csr_matrix(csr)
        csr.sum_duplicates()
        csr.sort_indices()
        self._csr = csr

    @classmethod
    def from_coo(cls, rows, cols, values, shape):
        return cls(sp.coo_matrix((values, (rows, cols)), shape=shape))

    @classmethod
    def from_dense(cls, array):
        return cls(sp.csr_matrix(np.asarray(array, dtype=float)))

    @classmethod
    def identity(cls, n):
        return cls(sp.identity(n, format="csr"))

    @property
    def shape(self):
        return self._csr.shape

    @property
    def indptr(self):
        return self._csr.indptr

    @property
    def indices(self):
        return self._csr.indices

    @property
    def values(self):
        return self._csr.data

    def to_dense(self):
        return self._csr.toarray()

    def to_scipy(self):
        return self._csr

    def transpose(self):
        return SparseMatrix(self._csr.T.tocsr())

    def dump_coordinates(self, path):
        """Text dump in (row, col, value) coordinate format."""
        coo = self._csr.tocoo()
        with open(path, "w") as fh:
            fh.write(f"{coo.shape[0]} {coo.shape[1]} {coo.nnz}\n")
            for r, c, v in zip(coo.row, coo.col, coo.data):
                fh.write(f"{r} {c} {v!r}\n")


def matvec(m, x):
    return m.to_scipy() @ np.asarray(x, dtype=float)


def block_compose(blocks, shape):
    """Compose a sparse matrix from placed sub-blocks.

    blocks is an iterable of (row_offset, col_offset, matrix) or
    (row_offset, col_offset, matrix, factor) or (..., factor, transpose)
    entries, where matrix is a SparseMatrix, a scipy sparse matrix or a
    dense array.  Overlapping entries are summed.
    """
    rows, cols, vals = [], [], []
    for entry in blocks:
        r0, c0, m = entry[0], entry[1], entry[2]
        factor = entry[3] if len(entry) > 3 else 1.0
        transpose = entry[4] if len(entry) > 4 else False
        if isinstance(m, SparseMatrix):
            m = m.to_scipy()
        coo = sp.coo_matrix(m)
        if transpose:
            coo = coo.T
        if r0 + coo.shape[0] > shape[0] or c0 + coo.shape[1] > shape[1]:
            raise ValueError("block placement exceeds target shape")
        rows.append(coo.row + r0)
        cols.append(coo.col + c0)
        vals.append(factor * coo.data)
    if rows:
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
    return SparseMatrix.from_coo(rows, cols, vals, shape)


def solve_direct(m, b):
    """Solve m x = b by sparse LU with partial pivoting.

    Raises SingularMatrixError when a pivot falls below 1e-14 relative
    to the largest pivot.
    """
    csr = m.to_scipy().tocsc()
    if csr.shape[0] != csr.shape[1]:
        raise ValueError("solve_direct needs a square matrix")
    b = np.asarray(b, dtype=float)
    try:
        lu = spla.splu(csr)
    except RuntimeError as exc:
        raise SingularMatrixError(f"sparse LU failed: {exc}") from exc
    piv = np.abs(lu.U.diagonal())
    ref = piv.max() if piv.size else 0.0
    if ref == 0.0 or piv.min() < _PIVOT_TOL * ref:
        idx = int(np.argmin(piv)) if piv.size else 0
        raise SingularMatrixError(
            f"pivot {piv.min() if piv.size else 0.0:.3e} below tolerance "
            f"at index {idx}", index=idx)
    return lu.solve(b)
