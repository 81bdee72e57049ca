"""Periodic Fourier reference solver with ETDRK4 time stepping.

Used only to cross-check the compactified scheme on data that are
effectively periodic on L[-pi, pi).
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .chebyshev import interpolate


@dataclass(frozen=True, eq=False)
class FourierGrid:
    M: int
    L: float

    def __post_init__(self):
        if self.M < 8 or self.M % 2:
            raise ValueError(f"M must be even and >= 8, got {self.M}")
        if not self.L > 0:
            raise ValueError(f"L must be positive, got {self.L}")

    @cached_property
    def x(self) -> np.ndarray:
        return self.L * (-np.pi + 2 * np.pi * np.arange(self.M) / self.M)

    @cached_property
    def k(self) -> np.ndarray:
        return np.fft.fftfreq(self.M, d=1.0 / self.M) / self.L

    @cached_property
    def dealias(self) -> np.ndarray:
        idx = np.abs(np.fft.fftfreq(self.M, d=1.0 / self.M))
        return idx <= self.M / 3


class EtdCoefficients:
    """ETDRK4 weights for the diagonal linear part i eps^2 k^3 (Cox-Matthews form).

    phi-type functions are averaged over a circle of radius 1 around each
    h * lambda to avoid cancellation near lambda = 0.
    """

    def __init__(self, grid: FourierGrid, eps: float, h: float, n_contour: int = 32):
        self.h = h
        lam = 1j * eps**2 * grid.k**3
        self.lam = lam
        z = h * lam
        self.E = np.exp(z)
        self.E2 = np.exp(z / 2)
        r = np.exp(2j * np.pi * (np.arange(n_contour) + 0.5) / n_contour)
        zr = z[:, None] + r[None, :]
        ez = np.exp(zr)
        self.Q = h * np.mean((np.exp(zr / 2) - 1) / zr, axis=1)
        self.f1 = h * np.mean((-4 - zr + ez * (4 - 3 * zr + zr**2)) / zr**3, axis=1)
        self.f2 = h * np.mean((2 + zr + ez * (zr - 2)) / zr**3, axis=1)
        self.f3 = h * np.mean((-4 - 3 * zr - zr**2 + ez * (4 - zr)) / zr**3, axis=1)
        for arr in (self.Q, self.f1, self.f2, self.f3):
            if not np.all(np.isfinite(arr)):
                raise FloatingPointError("non-finite ETD weights")


def _nonlinear(grid: FourierGrid, p: int, real: bool):
    ik = 1j * grid.k
    mask = grid.dealias

    def N(uh):
        u = np.fft.ifft(uh)
        if real:
            u = u.real
        return -(ik / p) * np.fft.fft(u**p) * mask

    return N


def evolve_periodic(u0_values, grid: FourierGrid, p: int = 2, eps: float = 1.0,
                    T: float = 1.0, Nt: int = 100, nonlinear: bool = True,
                    etd: EtdCoefficients | None = None, hook=None, every: int = 0) -> np.ndarray:
    """u_t + eps^2 u_xxx + u^{p-1} u_x = 0 on the periodic grid up to time T.

    ``hook(step, t, values)`` runs at step 0, every ``every`` steps and at
    the last step when given.
    """
    u0 = np.asarray(u0_values)
    real = not np.iscomplexobj(u0)
    h = T / Nt
    if etd is None:
        etd = EtdCoefficients(grid, eps, h)
    uh = np.fft.fft(u0)
    if nonlinear:
        N = _nonlinear(grid, p, real)
    else:
        N = lambda v: np.zeros_like(v)
    E, E2, Q, f1, f2, f3 = etd.E, etd.E2, etd.Q, etd.f1, etd.f2, etd.f3

    def values(vh):
        u = np.fft.ifft(vh)
        return u.real if real else u

    if hook is not None:
        hook(0, 0.0, values(uh))
    for n in range(1, Nt + 1):
        Nu = N(uh)
        a = E2 * uh + Q * Nu
        Na = N(a)
        b = E2 * uh + Q * Na
        Nb = N(b)
        c = E2 * a + Q * (2 * Nb - Nu)
        Nc = N(c)
        uh = E * uh + f1 * Nu + 2 * f2 * (Na + Nb) + f3 * Nc
        if not np.all(np.isfinite(uh)):
            raise FloatingPointError(f"non-finite Fourier solution at step {n}")
        if hook is not None and ((every and n % every == 0) or n == Nt):
            hook(n, n * h, values(uh))
    return values(uh)


def spectral_tail_fraction(values, grid: FourierGrid) -> float:
    """Share of spectral energy in the top third of the resolved wavenumbers."""
    uh = np.abs(np.fft.fft(values)) ** 2
    return float(uh[~grid.dealias].sum() / uh.sum())


def periodic_diagnostics(values, grid: FourierGrid, p: int, eps: float, lam: float = 0.0) -> dict:
    """Mass, L^2 norm, energies and a trailing-coefficient floor on the periodic grid."""
    u = np.asarray(values, dtype=float)
    dx = 2 * np.pi * grid.L / grid.M
    uh = np.fft.fft(u)
    ux = np.fft.ifft(1j * grid.k * uh).real
    grad = 0.5 * eps**2 * ux**2
    norm = p * (p + 1)
    mags = np.abs(uh) / grid.M
    order = np.argsort(np.abs(grid.k))
    tail = order[int(np.ceil(0.95 * grid.M)):]
    return {
        "mass": float(u.sum() * dx),
        "l2sq": float((u**2).sum() * dx),
        "energy": float((u ** (p + 1) / norm - grad).sum() * dx),
        "modified_energy": float(((u ** (p + 1) - lam * u**2) / norm - grad).sum() * dx),
        "coeff_floor": float(mags[tail].max()),
    }


def compare_solutions(cheb_u, grid, fourier_values, fgrid: FourierGrid, window) -> float:
    """Max |u_cheb - u_fourier| over Fourier nodes inside the x-window.

    ``cheb_u`` are nodal values of u on the compact grid; they are evaluated
    at the Fourier nodes by barycentric interpolation in l.
    """
    lo, hi = window
    sel = (fgrid.x >= lo) & (fgrid.x <= hi)
    if not sel.any():
        raise ValueError(f"window {window} contains no Fourier nodes")
    xs = fgrid.x[sel]
    uc = interpolate(grid.l, np.asarray(cheb_u, dtype=float), grid.l_of_x(xs))
    return float(np.abs(uc - np.asarray(fourier_values)[sel]).max())
