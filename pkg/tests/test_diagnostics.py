import math
from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from compactkdv.chebyshev import chebyshev_nodes
from compactkdv.diagnostics import (
    IncompatibleLimits,
    NoBreakup,
    breakup_point,
    choose_lambda,
    coefficient_floor,
    conserved_quantities,
    fit_solitons,
    relative_drift,
)
from compactkdv.domain import make_grid
from compactkdv.initial_data import AlgebraicDecay, DataFamily, FiniteStep, MollifiedStep, Soliton
from compactkdv.problem import FieldState, ProblemSpec, background_coeffs, decompose


@dataclass(frozen=True)
class Gaussian(DataFamily):
    def derivatives(self, x):
        x = np.asarray(x, dtype=float)
        u = np.exp(-x * x)
        return u, -2 * x * u, (4 * x * x - 2) * u

    def decreasing_range(self):
        return (0.0, 6.0)


@dataclass(frozen=True)
class Ramp(DataFamily):
    def derivatives(self, x):
        x = np.asarray(x, dtype=float)
        return np.arctan(x), 1 / (1 + x * x), -2 * x / (1 + x * x) ** 2

    def decreasing_range(self):
        return (-10.0, 10.0)


def crossing_times(family, p, xi):
    """Crossing time of each pair of neighbouring characteristics (inf if they diverge)."""
    speed = family.evaluate(xi) ** (p - 1)
    dspeed = np.diff(speed)
    with np.errstate(divide="ignore", over="ignore"):
        return 0.5 * (xi[1:] + xi[:-1]), np.where(dspeed < 0, -np.diff(xi) / dspeed, np.inf)


def crossing_oracle(family, p, lo, hi, n=200001):
    """Earliest crossing of characteristics by a dense scan.

    The minimum of the crossing time is flat, so the grid argmin is refined by
    the vertex of a local polynomial fit to the crossing times around it.
    """
    mid, t = crossing_times(family, p, np.linspace(lo, hi, n))
    j = int(np.argmin(t))
    w = 0.02
    mid, t = crossing_times(family, p, np.linspace(mid[j] - w, mid[j] + w, 4001))
    poly = np.polynomial.Polynomial.fit(mid, t, 8)
    crit = poly.deriv().roots()
    crit = crit[np.isreal(crit)].real
    crit = crit[np.abs(crit - mid[2000]) < w]
    xi_c = crit[np.argmin(poly(crit))]
    return float(poly(xi_c)), float(family.evaluate(xi_c))


def test_choose_lambda():
    assert choose_lambda(1.0, 0.0, 2) == 1.0
    assert choose_lambda(0.0, 0.0, 3) == 0.0
    assert choose_lambda(2.0, 0.0, 3) == 4.0
    assert choose_lambda(-1.0, 1.0, 3) == 1.0
    with pytest.raises(IncompatibleLimits):
        choose_lambda(2.0, 1.0, 2)
    with pytest.raises(IncompatibleLimits):
        choose_lambda(-1.0, 0.0, 2)


def test_zero_function():
    g = make_grid(64, 2.0)
    rec = conserved_quantities(FieldState(0.0, np.zeros(65)), g, ProblemSpec())
    assert rec.energy == 0 and rec.mass == 0 and rec.l2sq == 0 and rec.modified_energy == 0


def test_soliton_functionals(grid600):
    for p, l2 in ((2, 24.0), (5, None)):
        s = decompose(Soliton(1.0, p).nodal_values(grid600), grid600, (0, 0, 0))
        rec = conserved_quantities(s, grid600, ProblemSpec(p=p))
        if p == 5:
            assert abs(rec.energy) <= 1e-6
        else:
            assert rec.l2sq == pytest.approx(l2, abs=1e-6)
            assert rec.mass == pytest.approx(12.0, abs=1e-6)
        assert rec.modified_energy == rec.energy


def test_slow_decay_has_no_mass(grid600):
    fam = AlgebraicDecay(1.0)
    s = decompose(fam.nodal_values(grid600), grid600, (0, 0, 0))
    rec = conserved_quantities(s, grid600, ProblemSpec())
    assert rec.mass == pytest.approx(math.pi, abs=1e-6)
    fam = AlgebraicDecay(0.5)
    co = background_coeffs(*fam.boundary_data(2.0))
    s = decompose(fam.nodal_values(grid600), grid600, co)
    rec = conserved_quantities(s, grid600, ProblemSpec(A=co[0], B=co[1], C=co[2]))
    assert rec.mass is None and rec.energy is not None


def test_step_needs_lambda(grid600):
    fam = MollifiedStep(4)
    co = background_coeffs(*fam.boundary_data(2.0))
    s = decompose(fam.nodal_values(grid600), grid600, co)
    spec = ProblemSpec(A=co[0], B=co[1], C=co[2])
    with pytest.raises(IncompatibleLimits):
        conserved_quantities(s, grid600, spec)
    rec = conserved_quantities(s, grid600, ProblemSpec(A=co[0], B=co[1], C=co[2], lam=1.0))
    assert rec.mass is None and rec.energy is None and np.isfinite(rec.modified_energy)


def test_coefficient_floor():
    l = chebyshev_nodes(64)
    t3 = 4 * l**3 - 3 * l
    assert coefficient_floor(FieldState(0.0, t3)) <= 1e-13
    assert coefficient_floor(FieldState(0.0, np.cos(64 * np.arccos(l)))) == pytest.approx(1.0)


def test_step_floor_at_rounding_level(grid600):
    fam = MollifiedStep(4)
    co = background_coeffs(*fam.boundary_data(2.0))
    assert coefficient_floor(decompose(fam.nodal_values(grid600), grid600, co)) <= 1e-12


def test_relative_drift():
    assert relative_drift([2.0, 2.0, 2.0]) == 0
    assert relative_drift([2.0, 2.5, 1.0]) == 0.5
    with pytest.raises(ZeroDivisionError):
        relative_drift([0.0, 1.0])


def test_gaussian_breakup():
    bp = breakup_point(Gaussian(), 2)
    assert bp.t_c == pytest.approx(math.sqrt(math.e / 2), rel=1e-12)
    assert bp.u_c == pytest.approx(math.exp(-0.5), rel=1e-12)
    assert bp.x_c == pytest.approx(1 / math.sqrt(2) + bp.u_c * bp.t_c, rel=1e-12)
    t_c, u_c = crossing_oracle(Gaussian(), 2, 0.0, 6.0)
    assert bp.t_c == pytest.approx(t_c, rel=1e-6)
    assert bp.u_c == pytest.approx(u_c, rel=1e-6)


@pytest.mark.parametrize("family", [MollifiedStep(4), MollifiedStep(2), FiniteStep(4), Soliton(1.0, 2),
                                    Soliton(2.0, 3), AlgebraicDecay(1.0), AlgebraicDecay(0.5), Gaussian()])
@pytest.mark.parametrize("p", [2, 3, 4])
def test_breakup_against_crossing_oracle(family, p):
    lo, hi = family.decreasing_range()
    bp = breakup_point(family, p)
    t_c, u_c = crossing_oracle(family, p, lo, hi)
    assert bp.t_c == pytest.approx(t_c, rel=1e-6)
    assert bp.u_c == pytest.approx(u_c, rel=1e-6)


def test_no_breakup_for_increasing_data():
    with pytest.raises(NoBreakup):
        breakup_point(Ramp(), 2)


def test_fit_heights(grid600):
    for p, c in ((2, 1.0), (4, 1.0)):
        fam = Soliton(c, p)
        assert fam.amplitude == pytest.approx(3.0 if p == 2 else 10 ** (1 / 3))
        peaks = fit_solitons(fam.nodal_values(grid600), grid600, ProblemSpec(p=p))
        assert len(peaks) == 1
        assert peaks[0].c_fit == pytest.approx(1.0, rel=1e-10)
        assert abs(peaks[0].position) < 1e-8


def test_fit_two_solitons():
    # c = 10 puts enough nodes on the narrow Q_4 at x = 20
    g = make_grid(800, 10.0)
    u = Soliton(1.0, 2, x0=-20.0).nodal_values(g) + Soliton(4.0, 2, x0=20.0).nodal_values(g)
    peaks = fit_solitons(u, g, ProblemSpec(p=2))
    assert [round(pk.position) for pk in peaks] == [-20, 20]
    assert peaks[0].c_fit == pytest.approx(1.0, rel=0.01)
    assert peaks[1].c_fit == pytest.approx(4.0, rel=0.01)
    assert peaks[1].amplitude == pytest.approx(12.0, rel=1e-6)


def test_fit_empty_and_eps_window(grid600):
    assert fit_solitons(np.zeros(601), grid600, ProblemSpec()) == []
    eps = 0.3
    x = grid600.x.copy()
    x[0] = x[-1] = 0.0
    u = Soliton(1.5, 2).values(x / eps)
    u[0] = u[-1] = 0.0
    (pk,) = fit_solitons(u, grid600, ProblemSpec(eps=eps))
    assert pk.c_fit == pytest.approx(1.5, rel=1e-8)
    assert pk.misfit <= 1e-8


@settings(max_examples=15, deadline=None)
@given(st.floats(0.5, 5.0))
def test_fit_recovers_exact_soliton(c_speed):
    g = make_grid(600, 2.0)
    (pk,) = fit_solitons(Soliton(c_speed, 2).nodal_values(g), g, ProblemSpec(p=2))
    assert pk.c_fit == pytest.approx(c_speed, rel=1e-6)
    assert pk.misfit <= 1e-8
