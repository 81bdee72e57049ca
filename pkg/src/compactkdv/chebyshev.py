"""Chebyshev collocation primitives on the extrema grid l_n = cos(n pi / N)."""

from __future__ import annotations

import numpy as np
from scipy.fft import dct


def chebyshev_nodes(N: int) -> np.ndarray:
    """Return the N + 1 extrema points cos(n pi / N), n = 0..N (descending)."""
    if int(N) != N or N < 1:
        raise ValueError(f"N must be a positive integer, got {N!r}")
    N = int(N)
    # sine form keeps the grid exactly antisymmetric
    n = np.arange(N, -N - 1, -2)
    return np.sin(np.pi * n / (2 * N))


def diff_matrix(nodes: np.ndarray) -> np.ndarray:
    """Dense Chebyshev differentiation matrix on the extrema grid.

    Off-diagonal entries use the trigonometric form of l_i - l_j, the
    diagonal is the negated off-diagonal row sum so constants are
    differentiated to exactly zero.
    """
    nodes = np.asarray(nodes, dtype=float)
    N = len(nodes) - 1
    if N < 1:
        raise ValueError("need at least two nodes")
    i = np.arange(N + 1)
    c = np.ones(N + 1)
    c[0] = c[N] = 2.0
    c *= (-1.0) ** i
    th = np.pi / (2 * N)
    diff = 2.0 * np.sin(th * (i[:, None] + i[None, :])) * np.sin(th * (i[None, :] - i[:, None]))
    np.fill_diagonal(diff, 1.0)
    D = np.outer(c, 1.0 / c) / diff
    np.fill_diagonal(D, 0.0)
    D[i, i] = -D.sum(axis=1)
    return D


def to_coefficients(values: np.ndarray) -> np.ndarray:
    """Chebyshev coefficients v_n of the interpolant through nodal values."""
    values = np.asarray(values, dtype=float)
    N = len(values) - 1
    if N < 1:
        raise ValueError("need at least two nodal values")
    coeffs = dct(values, type=1) / N
    coeffs[0] *= 0.5
    coeffs[N] *= 0.5
    return coeffs


def from_coefficients(coeffs: np.ndarray) -> np.ndarray:
    """Evaluate sum_n v_n T_n at the extrema grid of matching size."""
    b = np.array(coeffs, dtype=float)
    N = len(b) - 1
    if N < 1:
        raise ValueError("need at least two coefficients")
    b[0] *= 2.0
    b[N] *= 2.0
    return 0.5 * dct(b, type=1)


def clenshaw_curtis_weights(nodes: np.ndarray) -> np.ndarray:
    """Quadrature weights on [-1, 1] for the extrema grid."""
    N = len(nodes) - 1
    if N < 1:
        raise ValueError("need at least two nodes")
    k = np.arange(N + 1)
    moments = np.zeros(N + 1)
    even = k % 2 == 0
    moments[even] = 2.0 / (1.0 - k[even] ** 2)
    # w = W C S I with C the cosine matrix, W the DCT-I end weights, S the
    # coefficient scaling; the transposed transform applied to the moments
    z = moments / N
    z[0] *= 0.5
    z[N] *= 0.5
    z[1:N] *= 0.5
    w = dct(z, type=1)
    w[1:N] *= 2.0
    return w


def barycentric_weights(N: int) -> np.ndarray:
    w = (-1.0) ** np.arange(N + 1)
    w[0] *= 0.5
    w[N] *= 0.5
    return w


def interpolate(nodes: np.ndarray, values: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Barycentric evaluation of the nodal interpolant at arbitrary points in [-1, 1]."""
    nodes = np.asarray(nodes, dtype=float)
    values = np.asarray(values, dtype=float)
    points = np.atleast_1d(np.asarray(points, dtype=float))
    w = barycentric_weights(len(nodes) - 1)
    diff = points[:, None] - nodes[None, :]
    exact = diff == 0.0
    diff[exact] = 1.0
    q = w[None, :] / diff
    out = (q @ values) / q.sum(axis=1)
    hit_rows, hit_cols = np.nonzero(exact)
    out[hit_rows] = values[hit_cols]
    return out
