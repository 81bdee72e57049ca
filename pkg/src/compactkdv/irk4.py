"""Two-stage Gauss (Hammer-Hollingsworth) time stepping with simplified Newton.

Each stage equation K_i = f(vt + h sum_j a_ij K_j) is split as

    L K_i = -(eps^2/(1+l)) d_xxx [(1+l)(vt + h sum_{j != i} a_ij K_j) + V]
            - NL(vt + h sum_j a_ij K_j),      L = 1 + h a_ii eps^2 (1/(1+l)) d_xxx (1+l)

and iterated stage by stage (K_1 then K_2), inverting only L. Only the
interior rows and columns enter, so K_i vanishes at l = +-1 exactly.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from .domain import CompactGrid
from .problem import FieldState, ProblemSpec, SemiDiscrete

log = logging.getLogger(__name__)

_S3 = math.sqrt(3.0)


@dataclass(frozen=True)
class ButcherTableau:
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray


GAUSS2 = ButcherTableau(
    a=np.array([[0.25, 0.25 - _S3 / 6], [0.25 + _S3 / 6, 0.25]]),
    b=np.array([0.5, 0.5]),
    c=np.array([0.5 - _S3 / 6, 0.5 + _S3 / 6]),
)


@dataclass(frozen=True)
class NewtonSettings:
    tol_update: float = 1e-12
    tol_abs: float = 1e-14
    tol_residual: float = 1e-10
    max_iter: int = 30

    def __post_init__(self):
        if not self.tol_update > 0:
            raise ValueError("tol_update must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


class NonConvergence(RuntimeError):
    def __init__(self, message, residual=None, step=None):
        super().__init__(message)
        self.residual = residual
        self.step = step


class StageOperator:
    """L = 1 + h a_11 eps^2 (1/(1+l)) d_xxx (1+l) on interior nodes, LU-factored once.

    A negative h gives the backward step (used for reversibility checks).
    """

    def __init__(self, grid: CompactGrid, spec: ProblemSpec, h: float,
                 tableau: ButcherTableau = GAUSS2, semi: SemiDiscrete | None = None):
        if h == 0 or not np.isfinite(h):
            raise ValueError(f"step size must be nonzero and finite, got {h!r}")
        self.grid = grid
        self.spec = spec
        self.h = float(h)
        self.tableau = tableau
        self.semi = semi if semi is not None else SemiDiscrete(grid, spec)
        diag = tableau.a[0, 0]
        if not np.allclose(np.diag(tableau.a), diag):
            raise ValueError("simplified Newton needs equal diagonal tableau entries")
        n = grid.N - 1
        self.matrix = np.eye(n) + (self.h * diag * self.semi.eps2) * self.semi.M
        with np.errstate(all="raise"):
            try:
                self.lu = lu_factor(self.matrix, check_finite=True)
            except (np.linalg.LinAlgError, FloatingPointError, ValueError) as exc:
                raise np.linalg.LinAlgError(
                    f"cannot factor stage operator (N={grid.N}, c={grid.c}, h={h}, eps={spec.eps})"
                ) from exc
        if np.any(np.diag(self.lu[0]) == 0):
            raise np.linalg.LinAlgError(
                f"singular stage operator (N={grid.N}, c={grid.c}, h={h}, eps={spec.eps})"
            )

    def solve(self, b):
        return lu_solve(self.lu, b, check_finite=False)

    def matches(self, grid, spec, h) -> bool:
        return grid is self.grid and spec.eps == self.spec.eps and h == self.h


def build_stage_operator(grid, spec, h, tableau=GAUSS2) -> StageOperator:
    if not h > 0:
        raise ValueError(f"step size must be positive, got {h!r}")
    return StageOperator(grid, spec, h, tableau)


def newton_stages(state: FieldState, op: StageOperator, spec: ProblemSpec = None,
                  settings: NewtonSettings = NewtonSettings(), guess=None):
    """Solve the stage system; returns (K1, K2, iterations) as full-length vectors."""
    semi = op.semi
    a = op.tableau.a
    h = op.h
    v = state.vt[1:-1]
    n = len(v)
    if guess is None:
        K1, K2 = np.zeros(n), np.zeros(n)
    else:
        K1, K2 = (g[1:-1].copy() for g in guess)
    # dispersive term of vt itself is common to both stages
    base = semi.dispersive(v)
    hM = -semi.eps2 * h
    M = semi.M
    nl = semi.nonlinear
    residual = np.inf
    previous = np.inf
    for it in range(1, settings.max_iter + 1):
        MK2 = M @ K2
        F1 = base + hM * a[0, 1] * MK2 + nl(v + h * (a[0, 0] * K1 + a[0, 1] * K2))
        K1_new = op.solve(F1)
        MK1 = M @ K1_new
        F2 = base + hM * a[1, 0] * MK1 + nl(v + h * (a[1, 0] * K1_new + a[1, 1] * K2))
        K2_new = op.solve(F2)
        d1 = np.abs(K1_new - K1).max()
        d2 = np.abs(K2_new - K2).max()
        K1, K2 = K1_new, K2_new
        if not (np.isfinite(d1) and np.isfinite(d2)):
            raise NonConvergence(f"non-finite stage values at iteration {it}")
        residual = max(d1, d2)
        scale = max(np.abs(K1).max(), np.abs(K2).max())
        if residual <= settings.tol_update * scale or residual <= settings.tol_abs:
            break
        # stagnation at the rounding floor of the stiff products
        if residual >= 0.9 * previous and residual <= settings.tol_residual * max(scale, 1.0):
            break
        previous = residual
    else:
        raise NonConvergence(
            f"simplified Newton did not converge in {settings.max_iter} iterations "
            f"(last update {residual:.3e})",
            residual=residual,
        )
    out1 = np.zeros(n + 2)
    out2 = np.zeros(n + 2)
    out1[1:-1] = K1
    out2[1:-1] = K2
    return out1, out2, it


def stage_residual(state: FieldState, op: StageOperator, K1, K2) -> float:
    """Max-norm of L^{-1}(rhs of the split stage system) - K, for both stages."""
    semi = op.semi
    a, h = op.tableau.a, op.h
    v = state.vt[1:-1]
    k1, k2 = K1[1:-1], K2[1:-1]
    base = semi.dispersive(v)
    hM = -semi.eps2 * h
    F1 = base + hM * a[0, 1] * (semi.M @ k2) + semi.nonlinear(v + h * (a[0, 0] * k1 + a[0, 1] * k2))
    F2 = base + hM * a[1, 0] * (semi.M @ k1) + semi.nonlinear(v + h * (a[1, 0] * k1 + a[1, 1] * k2))
    return max(np.abs(op.solve(F1) - k1).max(), np.abs(op.solve(F2) - k2).max())


def step(state: FieldState, op: StageOperator, spec: ProblemSpec = None,
         settings: NewtonSettings = NewtonSettings(), tableau: ButcherTableau = None,
         guess=None):
    """Advance one step; returns (new state, newton iterations, (K1, K2))."""
    if tableau is not None and tableau is not op.tableau:
        raise ValueError("tableau differs from the one the stage operator was built with")
    K1, K2, its = newton_stages(state, op, spec, settings, guess=guess)
    b = op.tableau.b
    vt = state.vt + op.h * (b[0] * K1 + b[1] * K2)
    vt[0] = vt[-1] = 0.0
    return FieldState(t=state.t + op.h, vt=vt), its, (K1, K2)


@dataclass
class Trajectory:
    state: FieldState
    steps: int
    newton_iters: list = field(default_factory=list)
    records: list = field(default_factory=list)


Hook = Callable[[int, float, FieldState], object]


def evolve(initial: FieldState, grid: CompactGrid, spec: ProblemSpec,
           settings: NewtonSettings = NewtonSettings(), T: float = 1.0, Nt: int = 100,
           hooks: Sequence[Hook] = (), every: int = 1, op: StageOperator | None = None,
           start_step: int = 0, warm_start: bool = False,
           newton_log: list | None = None, stop_after: int | None = None) -> Trajectory:
    """Fixed-step evolution from step ``start_step`` to ``Nt`` with h = T / Nt.

    Hooks are called as hook(step, t, state) at step 0 (if starting there),
    every ``every`` steps, and at the final step; non-None return values are
    collected in ``records``. Newton iteration counts are appended to
    ``newton_log`` (a fresh list by default) as each step completes.
    ``stop_after`` ends the loop early at that step index (the final hook
    still fires there), which is how interrupted runs are produced.
    """
    if not T > 0 or Nt < 1:
        raise ValueError("need T > 0 and Nt >= 1")
    h = T / Nt
    if op is None or not op.matches(grid, spec, h):
        op = StageOperator(grid, spec, h)
    traj = Trajectory(state=initial.copy(), steps=start_step,
                      newton_iters=newton_log if newton_log is not None else [])

    def fire(k, st):
        for hook in hooks:
            rec = hook(k, st.t, st)
            if rec is not None:
                traj.records.append(rec)

    state = traj.state
    if start_step == 0:
        fire(0, state)
    guess = None
    last = Nt if stop_after is None else min(Nt, stop_after)
    for k in range(start_step + 1, last + 1):
        try:
            state, its, stages = step(state, op, spec, settings, guess=guess)
        except NonConvergence as exc:
            raise NonConvergence(f"step {k}: {exc}", residual=exc.residual, step=k) from exc
        if warm_start:
            guess = stages
        # fixed grid of times, no accumulation drift
        state.t = k * h
        traj.newton_iters.append(its)
        if k % every == 0 or k == last:
            fire(k, state)
        traj.steps = k
    traj.state = state
    return traj
