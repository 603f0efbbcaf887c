"""Quadrature rules shared by assembly, interpolation and energy evaluation.

The element rule is a 7-point degree-5 rule and the side rule is 5-point
Gauss-Legendre.  Both exceed every polynomial degree appearing in the
lowest-order assembly, so the discrete identities hold up to roundoff.
Higher-order tensor rules are available for oracle-grade reference values.
"""

import numpy as np

_SQRT15 = np.sqrt(15.0)

# degree-5 Radon rule on the triangle, barycentric coordinates and weights
# (weights sum to one, scale by the element area)
_A1 = (6.0 - _SQRT15) / 21.0
_A2 = (6.0 + _SQRT15) / 21.0
TRI_DEG5_BARY = np.array(
    [
        [1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0],
        [1.0 - 2.0 * _A1, _A1, _A1],
        [_A1, 1.0 - 2.0 * _A1, _A1],
        [_A1, _A1, 1.0 - 2.0 * _A1],
        [1.0 - 2.0 * _A2, _A2, _A2],
        [_A2, 1.0 - 2.0 * _A2, _A2],
        [_A2, _A2, 1.0 - 2.0 * _A2],
    ]
)
TRI_DEG5_WEIGHTS = np.array(
    [9.0 / 40.0]
    + 3 * [(155.0 - _SQRT15) / 1200.0]
    + 3 * [(155.0 + _SQRT15) / 1200.0]
)

# 3 side midpoints, exact for quadratics
TRI_DEG2_BARY = np.array(
    [[0.5, 0.5, 0.0], [0.0, 0.5, 0.5], [0.5, 0.0, 0.5]]
)
TRI_DEG2_WEIGHTS = np.array([1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0])


def gauss_1d(n=5):
    """Gauss-Legendre nodes and weights on [-1, 1]."""
    return np.polynomial.legendre.leggauss(n)


def segment_points(a, b, n=5):
    """Quadrature points and weights on the segments a[i] -> b[i].

    a, b have shape (k, 2); returns points (k, n, 2) and weights (k, n)
    whose row sums equal the segment lengths.
    """
    a = np.atleast_2d(a)
    b = np.atleast_2d(b)
    x, w = gauss_1d(n)
    mid = 0.5 * (a + b)
    half = 0.5 * (b - a)
    pts = mid[:, None, :] + x[None, :, None] * half[:, None, :]
    lengths = np.linalg.norm(b - a, axis=1)
    wts = 0.5 * lengths[:, None] * w[None, :]
    return pts, wts


def triangle_points(coords, bary, weights):
    """Map a barycentric rule onto physical triangles.

    coords has shape (k, 3, 2); returns points (k, q, 2) and physical
    weights (k, q) whose row sums equal the triangle areas.
    """
    pts = np.einsum("qj,kjd->kqd", bary, coords)
    e1 = coords[:, 1] - coords[:, 0]
    e2 = coords[:, 2] - coords[:, 0]
    area = 0.5 * np.abs(e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])
    return pts, area[:, None] * weights[None, :]


def triangle_rule_tensor(n):
    """Collapsed tensor-product Gauss rule on the reference triangle.

    Not degree-exact but accurate to near machine precision for smooth
    integrands at moderate n; used for reference values only.
    """
    x, wx = gauss_1d(n)
    u = 0.5 * (x + 1.0)
    wu = 0.5 * wx
    uu, vv = np.meshgrid(u, u, indexing="ij")
    ww = np.outer(wu, wu)
    # Duffy map (u, v) -> (u, v (1 - u)) with Jacobian (1 - u)
    lam1 = uu.ravel()
    lam2 = (vv * (1.0 - uu)).ravel()
    w = (ww * (1.0 - uu)).ravel()
    bary = np.column_stack([1.0 - lam1 - lam2, lam1, lam2])
    # raw weights integrate over the reference triangle (area 1/2);
    # rescale so they sum to one like the fixed rules above
    return bary, 2.0 * w
