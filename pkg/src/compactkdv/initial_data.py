"""Closed-form initial data families with analytic boundary limits.

Every family gives values, first and second x-derivatives at finite x, and
its limits at +-inf in closed form. Nothing here is ever evaluated at the
infinite sentinels of a :class:`~compactkdv.domain.CompactGrid`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .chebyshev import interpolate


@dataclass(frozen=True)
class Smoothness:
    analytic: bool
    order: int | None = None

    def __str__(self) -> str:
        return "analytic" if self.analytic else f"C^{self.order}"


@dataclass(frozen=True)
class BoundaryData:
    u_left: float
    u_right: float
    slope_left_l: float

    def __iter__(self):
        return iter((self.u_left, self.u_right, self.slope_left_l))


def _sech(y):
    e = np.exp(-np.abs(y))
    return 2.0 * e / (1.0 + e * e)


def _gauss_edge(s, n):
    """exp(-s^{2n}) with derivatives in s."""
    s = np.asarray(s, dtype=float)
    with np.errstate(over="ignore", under="ignore", invalid="ignore"):
        f = np.exp(-(s ** (2 * n)))
        f1 = -2 * n * s ** (2 * n - 1) * f
        f2 = (-2 * n * (2 * n - 1) * s ** (2 * n - 2) + 4 * n * n * s ** (4 * n - 2)) * f
    big = ~np.isfinite(f1) | ~np.isfinite(f2)
    f1 = np.where(big, 0.0, f1)
    f2 = np.where(big, 0.0, f2)
    return f, f1, f2


class DataFamily:
    name = "family"

    def values(self, x):
        return self.derivatives(x)[0]

    def evaluate(self, x):
        out = self.values(np.asarray(x, dtype=float))
        return float(out) if np.ndim(out) == 0 else out

    def derivatives(self, x):
        """(u, u_x, u_xx) at finite x."""
        raise NotImplementedError

    def boundary_data(self, c: float) -> BoundaryData:
        raise NotImplementedError

    def smoothness_class(self) -> Smoothness:
        return Smoothness(analytic=True)

    def nodal_values(self, grid) -> np.ndarray:
        """Values on a compact grid, endpoints filled from the closed-form limits."""
        bd = self.boundary_data(grid.c)
        u = np.empty(grid.N + 1)
        u[1:-1] = self.values(grid.x[1:-1])
        u[0] = bd.u_right
        u[-1] = bd.u_left
        return u

    def x2_limits(self) -> tuple[float, float]:
        """lim x^2 u at (+inf, -inf); only nonzero for 1/x^2-type tails."""
        return (0.0, 0.0)

    def decreasing_range(self) -> tuple[float, float]:
        """An x-interval containing every decreasing branch of interest."""
        return (-20.0, 20.0)


@dataclass(frozen=True)
class MollifiedStep(DataFamily):
    """1 for x < 0 and exp(-x^{2n}) for x >= 0."""

    n: int = 4
    name = "mollified_step"

    def derivatives(self, x):
        x = np.asarray(x, dtype=float)
        f, f1, f2 = _gauss_edge(np.maximum(x, 0.0), self.n)
        left = x < 0
        return np.where(left, 1.0, f), np.where(left, 0.0, f1), np.where(left, 0.0, f2)

    def boundary_data(self, c):
        return BoundaryData(1.0, 0.0, 0.0)

    def smoothness_class(self):
        return Smoothness(analytic=False, order=2 * self.n - 1)

    def decreasing_range(self):
        return (0.0, 3.0)


@dataclass(frozen=True)
class FiniteStep(DataFamily):
    """Plateau 1 on (x0, 0) with exp(-x^{2n}) edges on both sides."""

    n: int = 4
    x0: float = -5 * math.pi
    name = "finite_step"

    def derivatives(self, x):
        x = np.asarray(x, dtype=float)
        fr, fr1, fr2 = _gauss_edge(np.maximum(x, 0.0), self.n)
        fl, fl1, fl2 = _gauss_edge(np.minimum(x - self.x0, 0.0), self.n)
        right, left = x >= 0, x <= self.x0
        u = np.where(right, fr, np.where(left, fl, 1.0))
        u1 = np.where(right, fr1, np.where(left, fl1, 0.0))
        u2 = np.where(right, fr2, np.where(left, fl2, 0.0))
        return u, u1, u2

    def boundary_data(self, c):
        return BoundaryData(0.0, 0.0, 0.0)

    def smoothness_class(self):
        return Smoothness(analytic=False, order=2 * self.n - 1)

    def decreasing_range(self):
        return (0.0, 3.0)


@dataclass(frozen=True)
class AlgebraicDecay(DataFamily):
    """(1 + x^2)^(-a); violates the Faddeev condition for a <= 1."""

    a: float = 1.0
    name = "algebraic_decay"

    def derivatives(self, x):
        x = np.asarray(x, dtype=float)
        a = self.a
        with np.errstate(over="ignore"):
            r = 1.0 + x * x
        u = r ** (-a)
        u1 = -2 * a * x * r ** (-a - 1)
        # x^2 / r written as 1 - 1/r stays finite for huge |x|
        u2 = r ** (-a - 1) * (-2 * a + 4 * a * (a + 1) * (1.0 - 1.0 / r))
        return u, u1, u2

    def boundary_data(self, c):
        # u ~ (pi (1 + l) / (2c))^{2a} as l -> -1
        if self.a < 0.5:
            raise ValueError("algebraic_decay with a < 1/2 has an unbounded l-slope at l = -1")
        slope = math.pi / (2 * c) if self.a == 0.5 else 0.0
        return BoundaryData(0.0, 0.0, slope)

    def x2_limits(self):
        if self.a == 1.0:
            return (1.0, 1.0)
        if self.a < 1.0:
            return (math.inf, math.inf)
        return (0.0, 0.0)

    def decreasing_range(self):
        return (0.0, 20.0)


@dataclass(frozen=True)
class Soliton(DataFamily):
    """Solitary wave Q_c(x - x0) of speed c_speed."""

    c_speed: float = 1.0
    p: int = 2
    x0: float = 0.0
    name = "soliton"

    @property
    def amplitude(self) -> float:
        return (self.p * (self.p + 1) * self.c_speed / 2.0) ** (1.0 / (self.p - 1))

    @property
    def width_rate(self) -> float:
        return math.sqrt(self.c_speed) * (self.p - 1) / 2.0

    def derivatives(self, x):
        z = np.asarray(x, dtype=float) - self.x0
        m = 2.0 / (self.p - 1)
        b = self.width_rate
        q = self.amplitude * _sech(b * z) ** m
        th = np.tanh(b * z)
        q1 = -m * b * q * th
        q2 = m * b * b * q * ((m + 1) * th * th - 1.0)
        return q, q1, q2

    def boundary_data(self, c):
        return BoundaryData(0.0, 0.0, 0.0)

    def decreasing_range(self):
        return (self.x0, self.x0 + 30.0 / self.width_rate)


@dataclass(frozen=True)
class Tabulated(DataFamily):
    """Nodal values on a compact grid with declared boundary data."""

    values_at_nodes: np.ndarray = field(repr=False, default=None)
    u_left: float = 0.0
    u_right: float = 0.0
    slope_left_l: float = 0.0
    c: float | None = None
    name = "tabulated"

    def boundary_data(self, c):
        return BoundaryData(self.u_left, self.u_right, self.slope_left_l)

    def nodal_values(self, grid):
        v = np.asarray(self.values_at_nodes, dtype=float)
        if len(v) != grid.N + 1:
            raise ValueError(f"tabulated data has {len(v)} values, grid needs {grid.N + 1}")
        return v.copy()

    def derivatives(self, x):
        if self.c is None:
            raise ValueError("tabulated data needs the map constant c to be evaluated at x")
        from .domain import make_grid

        g = make_grid(len(self.values_at_nodes) - 1, self.c)
        u = self.nodal_values(g)
        u1 = g.ops.first @ u
        u2 = g.ops.first @ u1
        lx = g.l_of_x(np.atleast_1d(x))
        out = tuple(interpolate(g.l, f, lx) for f in (u, u1, u2))
        if np.ndim(x) == 0:
            out = tuple(float(o[0]) for o in out)
        return out

    def smoothness_class(self):
        return Smoothness(analytic=True)


def evaluate(family: DataFamily, x):
    return family.evaluate(x)


def boundary_data(family: DataFamily, grid) -> BoundaryData:
    return family.boundary_data(grid.c)


def smoothness_class(family: DataFamily) -> Smoothness:
    return family.smoothness_class()


def read_tabulated(path) -> Tabulated:
    """Read the plain-text tabulated format.

    Header lines ``u_left=``, ``u_right=``, ``slope_left_l=`` (and optionally
    ``c=``) followed by one nodal value per line in node index order.
    """
    header = {}
    values = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" in line:
            key, _, val = line.partition("=")
            header[key.strip()] = float(val)
        else:
            values.append(float(line))
    missing = {"u_left", "u_right", "slope_left_l"} - header.keys()
    if missing:
        raise ValueError(f"tabulated file {path} lacks header keys {sorted(missing)}")
    return Tabulated(
        values_at_nodes=np.array(values),
        u_left=header["u_left"],
        u_right=header["u_right"],
        slope_left_l=header["slope_left_l"],
        c=header.get("c"),
    )


def write_tabulated(path, values, u_left, u_right, slope_left_l, c=None) -> None:
    lines = [f"u_left={u_left!r}", f"u_right={u_right!r}", f"slope_left_l={slope_left_l!r}"]
    if c is not None:
        lines.append(f"c={c!r}")
    lines += [repr(float(v)) for v in values]
    Path(path).write_text("\n".join(lines) + "\n")


def make_family(name: str, **params) -> DataFamily:
    factories = {
        "mollified_step": MollifiedStep,
        "finite_step": FiniteStep,
        "algebraic_decay": AlgebraicDecay,
        "soliton": Soliton,
    }
    if name == "tabulated":
        return read_tabulated(params["path"])
    if name not in factories:
        raise ValueError(f"unknown data family {name!r}")
    return factories[name](**params)
