"""Conserved quantities, resolution estimate, Hopf break-up and soliton fits."""

from __future__ import annotations

import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy.optimize import brentq

from .chebyshev import interpolate, to_coefficients
from .domain import CompactGrid, line_integral
from .initial_data import DataFamily, Soliton
from .problem import FieldState, ProblemSpec, reconstruct


class IncompatibleLimits(ValueError):
    pass


class NoBreakup(ValueError):
    pass


class NoRoot(ValueError):
    pass


@dataclass
class DiagnosticsRecord:
    t: float
    mass: float | None
    l2sq: float | None
    energy: float | None
    modified_energy: float
    coeff_floor: float
    newton_iters: int | None = None

    def as_dict(self) -> dict:
        return asdict(self)


def choose_lambda(u_left: float, u_right: float, p: int) -> float:
    """lambda making (u^{p+1} - lambda u^2) vanish at both ends."""
    if not (np.isfinite(u_left) and np.isfinite(u_right)):
        raise IncompatibleLimits("limits must be finite")
    nonzero = [u ** (p - 1) for u in (u_left, u_right) if u != 0]
    if not nonzero:
        return 0.0
    if len(nonzero) == 2 and not math.isclose(nonzero[0], nonzero[1], rel_tol=1e-14):
        raise IncompatibleLimits(
            f"no single lambda bounds both ends: u_left^(p-1)={nonzero[0]}, u_right^(p-1)={nonzero[1]}"
        )
    lam = nonzero[0]
    if lam < 0:
        raise IncompatibleLimits(f"limits give negative lambda {lam}")
    return lam


def coefficient_floor(state: FieldState, grid: CompactGrid | None = None, fraction: float = 0.05) -> float:
    """Largest |v_n| over the last ``fraction`` of Chebyshev coefficients of vt."""
    coeffs = np.abs(to_coefficients(state.vt))
    N = len(coeffs) - 1
    start = int(math.ceil((1.0 - fraction) * N))
    return float(coeffs[start:].max())


def _x2_tails(u: np.ndarray, grid: CompactGrid, tol: float = 1e-8):
    """lim x^2 u at (+inf, -inf), or None where u decays only like 1/|x|.

    With u(+-1) = 0 and x ~ 2c / (pi (1 -+ l)), x^2 u -> (2 c^2 / pi^2) u_ll(+-1).
    """
    D = grid.D
    ul = D @ u
    scale = max(1.0, np.abs(ul).max())
    if abs(ul[0]) > tol * scale or abs(ul[-1]) > tol * scale:
        return None
    ull = D @ ul
    k = 2.0 * grid.c**2 / np.pi**2
    return (k * ull[0], k * ull[-1])


def conserved_quantities(state: FieldState, grid: CompactGrid, spec: ProblemSpec,
                         newton_iters: int | None = None) -> DiagnosticsRecord:
    """Mass, L^2 norm, energy and modified energy of the current state.

    Quantities that diverge for the current boundary limits are None; the
    modified energy uses spec.lam and is always defined when lambda is
    consistent with the limits.
    """
    p, lam = spec.p, spec.lam
    u = reconstruct(state, grid, spec.coeffs)
    u_right, u_left = u[0], u[-1]
    bounded = u ** (p + 1) - lam * u**2
    if abs(u_left ** (p + 1) - lam * u_left**2) > 1e-12 or abs(u_right ** (p + 1) - lam * u_right**2) > 1e-12:
        raise IncompatibleLimits(
            f"lambda={lam} leaves the modified-energy integrand unbounded "
            f"(limits {u_left}, {u_right})"
        )
    ux = grid.ops.first @ u
    grad = 0.5 * spec.eps**2 * ux**2
    norm = p * (p + 1)
    modified = line_integral(grid, bounded / norm - grad)
    decaying = u_left == 0.0 and u_right == 0.0
    mass = l2sq = energy = None
    if decaying:
        tails = _x2_tails(u, grid)
        if tails is not None:
            mass = line_integral(grid, u, x2_limits=tails)
        l2sq = line_integral(grid, u**2)
        energy = line_integral(grid, u ** (p + 1) / norm - grad)
    return DiagnosticsRecord(
        t=state.t,
        mass=mass,
        l2sq=l2sq,
        energy=energy,
        modified_energy=modified,
        coeff_floor=coefficient_floor(state, grid),
        newton_iters=newton_iters,
    )


def relative_drift(values) -> float:
    """max_t |F(t) - F(0)| / |F(0)|."""
    v = np.asarray(values, dtype=float)
    if v[0] == 0:
        raise ZeroDivisionError("drift undefined for F(0) = 0")
    return float(np.abs(v - v[0]).max() / abs(v[0]))


@dataclass(frozen=True)
class BreakupPoint:
    x_c: float
    t_c: float
    u_c: float


def breakup_point(family: DataFamily, p: int, n_scan: int = 4096, xi_range=None) -> BreakupPoint:
    """First gradient catastrophe of u_t + u^{p-1} u_x = 0 with data ``family``.

    Along the characteristic from xi the slope blows up at
    t = -1 / (d/dxi a(u0(xi))), a(u) = u^{p-1}; the break-up is at its
    interior minimum, where d^2/dxi^2 a(u0) = 0 (equivalently
    Phi'' a' = Phi' a'' for Phi the inverse of u0 on that branch).
    """
    lo, hi = xi_range if xi_range is not None else family.decreasing_range()

    def a(u):
        return u ** (p - 1)

    def da(u):
        return (p - 1) * u ** (p - 2)

    def dda(u):
        return (p - 1) * (p - 2) * u ** (p - 3) if p > 2 else 0.0 * u

    def g(xi):
        u, u1, _ = family.derivatives(xi)
        return da(u) * u1

    def dg(xi):
        u, u1, u2 = family.derivatives(xi)
        return dda(u) * u1 * u1 + da(u) * u2

    xi = np.linspace(lo, hi, n_scan)
    gv = np.asarray(g(xi), dtype=float)
    if not np.any(gv < 0):
        raise NoBreakup("characteristic speeds never decrease: no break-up")
    dgv = np.asarray(dg(xi), dtype=float)
    candidates = []
    for j in np.nonzero(dgv[:-1] * dgv[1:] < 0)[0]:
        if gv[j] < 0 or gv[j + 1] < 0:
            root = brentq(lambda s: float(dg(s)), xi[j], xi[j + 1], xtol=1e-15, rtol=4 * np.finfo(float).eps)
            gr = float(g(root))
            if gr < 0:
                candidates.append((gr, root))
    if not candidates:
        raise NoRoot("no interior extremum of the characteristic slope on the scan range")
    g_min, xi_c = min(candidates)
    t_c = -1.0 / g_min
    u_c = float(family.derivatives(xi_c)[0])
    return BreakupPoint(x_c=float(a(u_c) * t_c + xi_c), t_c=float(t_c), u_c=u_c)


@dataclass(frozen=True)
class SolitonPeak:
    position: float
    amplitude: float
    c_fit: float
    misfit: float


def _refine_peak(grid: CompactGrid, u: np.ndarray, du: np.ndarray, j: int) -> tuple[float, float]:
    """Peak of the interpolant near node j, from the root of its l-derivative."""
    lo, hi = grid.l[j + 1], grid.l[j - 1]
    slope = lambda s: float(interpolate(grid.l, du, s)[0])
    candidates = [float(grid.l[j])]
    for a, b in ((lo, grid.l[j]), (grid.l[j], hi)):
        if slope(a) > 0 > slope(b):
            candidates.append(brentq(slope, a, b, xtol=1e-15, rtol=4 * np.finfo(float).eps))
    vals = [float(interpolate(grid.l, u, s)[0]) for s in candidates]
    k = int(np.argmax(vals))
    return candidates[k], vals[k]


def fit_solitons(state_or_u, grid: CompactGrid, spec: ProblemSpec, min_amplitude: float = 0.1):
    """Match each interior maximum above ``min_amplitude`` to a soliton by its height.

    The speed follows from amplitude = (p(p+1)c/2)^{1/(p-1)}; the misfit is
    the max deviation from Q_c((x - x_peak)/eps) over |x - x_peak| <= 5 eps/sqrt(c).
    """
    if isinstance(state_or_u, FieldState):
        u = reconstruct(state_or_u, grid, spec.coeffs)
    else:
        u = np.asarray(state_or_u, dtype=float)
    p, eps = spec.p, spec.eps
    inner = u[1:-1]
    is_peak = (inner > u[:-2]) & (inner > u[2:]) & (inner > min_amplitude)
    peaks = []
    xs = grid.x
    du = grid.D @ u
    for j in np.nonzero(is_peak)[0] + 1:
        l_peak, amp = _refine_peak(grid, u, du, j)
        x_peak = grid.c * math.tan(0.5 * math.pi * l_peak)
        c_fit = 2.0 * amp ** (p - 1) / (p * (p + 1))
        half = 5.0 * eps / math.sqrt(c_fit)
        window = np.abs(xs - x_peak) <= half
        window[0] = window[-1] = False
        profile = Soliton(c_speed=c_fit, p=p).values((xs[window] - x_peak) / eps)
        misfit = float(np.abs(u[window] - profile).max()) if window.any() else 0.0
        peaks.append(SolitonPeak(position=x_peak, amplitude=amp, c_fit=c_fit, misfit=misfit))
    peaks.sort(key=lambda pk: pk.position)
    return peaks
