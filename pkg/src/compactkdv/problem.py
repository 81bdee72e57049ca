"""gKdV problem definition on the compact grid.

The solution is written u = (1 + l) vt + V(l) with the background
V = A (1+l)/2 + B (1+l)^2/4 + C (1-l)/2 absorbing the limits at infinity and
the l-slope at l = -1, so that vt vanishes at both endpoints.

The nonlinear term is u^{p-1} u_x throughout (the form for which Q_c is an
exact travelling wave).
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np

from .domain import CompactGrid


@dataclass(frozen=True)
class ProblemSpec:
    p: int = 2
    eps: float = 1.0
    A: float = 0.0
    B: float = 0.0
    C: float = 0.0
    lam: float = 0.0

    def __post_init__(self):
        if int(self.p) != self.p or self.p < 2:
            raise ValueError(f"p must be an integer >= 2, got {self.p!r}")
        if not self.eps > 0:
            raise ValueError(f"eps must be positive, got {self.eps!r}")
        if self.lam < 0:
            raise ValueError(f"lambda must be nonnegative, got {self.lam!r}")

    @property
    def coeffs(self) -> tuple[float, float, float]:
        return (self.A, self.B, self.C)

    def with_coeffs(self, coeffs) -> "ProblemSpec":
        A, B, C = coeffs
        return replace(self, A=A, B=B, C=C)


@dataclass
class FieldState:
    t: float
    vt: np.ndarray

    def copy(self) -> "FieldState":
        return FieldState(self.t, self.vt.copy())


def background_coeffs(u_left: float, u_right: float, slope_left_l: float) -> tuple[float, float, float]:
    """(A, B, C) such that u - V vanishes at l = +-1 with zero l-slope at l = -1."""
    vals = (u_left, u_right, slope_left_l)
    if not all(np.isfinite(vals)):
        raise ValueError(f"boundary data must be finite, got {vals}")
    C = float(u_left)
    A = C + 2.0 * float(slope_left_l)
    B = float(u_right) - A
    return A, B, C


def background(l: np.ndarray, coeffs) -> np.ndarray:
    A, B, C = coeffs
    return A * (1 + l) / 2 + B * (1 + l) ** 2 / 4 + C * (1 - l) / 2


def decompose(u_values, grid: CompactGrid, coeffs, t: float = 0.0, atol: float = 1e-10) -> FieldState:
    u = np.asarray(u_values, dtype=float)
    V = background(grid.l, coeffs)
    scale = max(1.0, np.abs(u).max())
    for idx, side in ((0, "right"), (-1, "left")):
        if abs(u[idx] - V[idx]) > atol * scale:
            raise ValueError(
                f"{side} endpoint mismatch: u={u[idx]!r} but background gives {V[idx]!r}"
            )
    vt = np.zeros(grid.N + 1)
    vt[1:-1] = (u[1:-1] - V[1:-1]) / (1 + grid.l[1:-1])
    return FieldState(t=t, vt=vt)


def reconstruct(state: FieldState, grid: CompactGrid, coeffs) -> np.ndarray:
    return (1 + grid.l) * state.vt + background(grid.l, coeffs)


class SemiDiscrete:
    """Interior-node form of d vt/dt = f(vt) for one grid and problem.

    Everything acts on the N - 1 interior values; the endpoint values of vt
    are identically zero.
    """

    def __init__(self, grid: CompactGrid, spec: ProblemSpec):
        self.grid = grid
        self.spec = spec
        i = grid.interior
        self.w = 1 + grid.l[i]
        V = background(grid.l, spec.coeffs)
        self.V = V[i]
        ops = grid.ops
        # d/dx and d^3/dx^3 acting on (1 + l) vt, interior rows and columns
        self.Dx = ops.first[i, i] * self.w[None, :]
        self.DxV = ops.first[i] @ V
        self.eps2 = spec.eps**2
        self.D3V = ops.third[i] @ V

    @cached_property
    def M(self) -> np.ndarray:
        """(1/(1+l)) d_xxx (1+l) on interior nodes."""
        i = self.grid.interior
        return self.grid.ops.third[i, i] * self.w[None, :] / self.w[:, None]

    def u(self, vt_int):
        return self.w * vt_int + self.V

    def dispersive(self, vt_int):
        """-(eps^2/(1+l)) d_xxx u."""
        return -self.eps2 * (self.M @ vt_int + self.D3V / self.w)

    def nonlinear(self, vt_int):
        """-(1/(1+l)) u^{p-1} u_x."""
        u = self.u(vt_int)
        ux = self.Dx @ vt_int + self.DxV
        return -(u ** (self.spec.p - 1)) * ux / self.w

    def __call__(self, vt_int):
        return self.dispersive(vt_int) + self.nonlinear(vt_int)


def rhs(state: FieldState, grid: CompactGrid, spec: ProblemSpec) -> np.ndarray:
    """vt_t at all nodes (endpoint entries are 0)."""
    out = np.zeros(grid.N + 1)
    out[1:-1] = SemiDiscrete(grid, spec)(state.vt[1:-1])
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite right-hand side")
    return out
