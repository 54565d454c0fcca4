"""Independent reference values for the interface projections.

These use the exact curves (not the polygonal trace), their own basis
definitions and a dense least-squares solve, sharing no code with ifred.
"""

import numpy as np


def line_g(x):
    return np.sin(2 * np.pi * x) + 0.35 * np.cos(5 * np.pi * x) + 0.20 * (2 * x - 1) ** 2


def circle_g(t):
    return np.sin(2 * t) + 0.35 * np.cos(5 * t) + 0.20 * np.cos(t)


def adapted_columns(x):
    return np.column_stack([np.sin(2 * np.pi * x), np.cos(5 * np.pi * x), (2 * x - 1) ** 2,
                            np.ones_like(x), np.cos(2 * np.pi * x), np.sin(5 * np.pi * x)])


def fourier_columns(t, m):
    cols = [np.ones_like(t)]
    k = 1
    while len(cols) < m:
        cols += [np.cos(k * t), np.sin(k * t)]
        k += 1
    return np.column_stack(cols[:m])


def poly_columns(x, m):
    s = 2 * x - 1
    return np.column_stack([s ** k for k in range(m)])


def relative_residual(values, columns, weights):
    sw = np.sqrt(weights)
    A, b = columns * sw[:, None], values * sw
    c, *_ = np.linalg.lstsq(A, b, rcond=None)
    return np.linalg.norm(b - A @ c) / np.linalg.norm(b)


def line_projection_error(kind, m, n=400):
    x, w = np.polynomial.legendre.leggauss(n)
    x, w = 0.5 * (x + 1), 0.5 * w
    cols = adapted_columns(x)[:, :m] if kind == "adapted_line" else poly_columns(x, m)
    return relative_residual(line_g(x), cols, w)


def circle_projection_error(m, n=2048, radius=0.5):
    # the periodic trapezoid rule is spectrally accurate; arc length is r dtheta
    t = 2 * np.pi * np.arange(n) / n
    w = np.full(n, 2 * np.pi * radius / n)
    return relative_residual(circle_g(t), fourier_columns(t, m), w)
