"""Compactification x = c tan(pi l / 2) of the real line onto [-1, 1]."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .chebyshev import chebyshev_nodes, clenshaw_curtis_weights, diff_matrix


@dataclass(frozen=True, eq=False)
class CompactGrid:
    """Chebyshev grid in l together with its image on the real line.

    ``x[0]`` and ``x[N]`` hold +inf / -inf sentinels; the Jacobian factor
    dl/dx = (2 / (pi c)) cos^2(pi l / 2) vanishes there.
    """

    N: int
    c: float
    l: np.ndarray
    x: np.ndarray
    jac: np.ndarray

    @cached_property
    def D(self) -> np.ndarray:
        return diff_matrix(self.l)

    @cached_property
    def weights(self) -> np.ndarray:
        return clenshaw_curtis_weights(self.l)

    @cached_property
    def dxdl(self) -> np.ndarray:
        """dx/dl at interior nodes, 0 at the endpoints (quadrature limit value)."""
        out = np.zeros(self.N + 1)
        out[1:-1] = 1.0 / self.jac[1:-1]
        return out

    @cached_property
    def ops(self) -> "XDerivative":
        return x_derivative_ops(self)

    @property
    def interior(self) -> slice:
        return slice(1, self.N)

    def l_of_x(self, x) -> np.ndarray:
        return 2.0 / np.pi * np.arctan(np.asarray(x, dtype=float) / self.c)


@dataclass(frozen=True, eq=False)
class XDerivative:
    first: np.ndarray
    third: np.ndarray


def make_grid(N: int, c: float) -> CompactGrid:
    if not (c > 0 and np.isfinite(c)):
        raise ValueError(f"map constant c must be positive, got {c!r}")
    if int(N) != N or N < 4:
        raise ValueError(f"N must be an integer >= 4, got {N!r}")
    N = int(N)
    l = chebyshev_nodes(N)
    x = np.empty(N + 1)
    x[0], x[N] = np.inf, -np.inf
    x[1:N] = c * np.tan(0.5 * np.pi * l[1:N])
    jac = 2.0 / (np.pi * c) * np.cos(0.5 * np.pi * l) ** 2
    jac[0] = jac[N] = 0.0
    return CompactGrid(N=N, c=float(c), l=l, x=x, jac=jac)


def x_derivative_ops(grid: CompactGrid) -> XDerivative:
    first = grid.jac[:, None] * grid.D
    third = first @ first @ first
    return XDerivative(first=first, third=third)


def line_integral(grid: CompactGrid, integrand_values, x2_limits=(0.0, 0.0)) -> float:
    """Approximate the integral over the real line of a function given at the nodes.

    The quadrature runs in l with the factor dx/dl, which blows up at the
    endpoints. There the product integrand * dx/dl is replaced by its limit
    pi/(2c) * lim x^2 f, with ``x2_limits`` = (lim at +inf, lim at -inf).
    The default 0 covers anything decaying faster than 1/x^2.
    """
    f = np.asarray(integrand_values, dtype=float)
    if f.shape != grid.l.shape:
        raise ValueError(f"expected {grid.N + 1} nodal values, got {f.shape}")
    inner = f[1:-1]
    if not np.all(np.isfinite(inner)):
        raise ValueError("non-finite integrand at interior nodes")
    total = float(np.dot(grid.weights[1:-1], inner * grid.dxdl[1:-1]))
    right, left = x2_limits
    scale = 0.5 * np.pi / grid.c
    return total + scale * (grid.weights[0] * right + grid.weights[-1] * left)
