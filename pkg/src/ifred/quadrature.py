"""Small quadrature tables."""

import numpy as np

# Dunavant, degree 5: (barycentric coordinates, weights summing to 1)
_A1, _W1 = 0.470142064105115, 0.132394152788506
_A2, _W2 = 0.101286507323456, 0.125939180544827
_B1, _B2 = 1 - 2 * _A1, 1 - 2 * _A2

TRIANGLE_DEG5 = (
    np.array([
        [1 / 3, 1 / 3, 1 / 3],
        [_A1, _A1, _B1], [_A1, _B1, _A1], [_B1, _A1, _A1],
        [_A2, _A2, _B2], [_A2, _B2, _A2], [_B2, _A2, _A2],
    ]),
    np.array([0.225, _W1, _W1, _W1, _W2, _W2, _W2]),
)


def triangle_points(corners: np.ndarray, rule=TRIANGLE_DEG5):
    """Physical quadrature points and weights for triangles ``corners`` (T, 3, 2).

    Returns points (T, Q, 2) and weights (T, Q) that already include the area.
    """
    bary, w = rule
    pts = np.einsum("qi,tij->tqj", bary, corners)
    d1 = corners[:, 1] - corners[:, 0]
    d2 = corners[:, 2] - corners[:, 0]
    area = 0.5 * np.abs(d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])
    return pts, area[:, None] * w[None, :]


def gauss_legendre_unit(n: int):
    """n-point Gauss-Legendre rule on [0, 1]."""
    t, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (t + 1.0), 0.5 * w
