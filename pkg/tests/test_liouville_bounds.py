import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quasilab import nonlinearity as nlm
from quasilab.errors import InsufficientRange
from quasilab.liouville_bounds import (
    BOUNDED_ADMISSIBLE,
    LOGARITHMIC,
    POLYNOMIAL,
    critical_dimension,
    growth_exponent,
    growth_fit,
    holder_chain_check,
    lower_bound_exponent,
)
from quasilab.phi_models import make_phi
from quasilab.profile_solver import Profile1D, RadialSolution, solve_radial


def test_critical_dimension_values():
    assert critical_dimension(2) == 10.0
    assert critical_dimension(3) == pytest.approx(9.0)
    assert critical_dimension(5) == pytest.approx(10.0)


@pytest.mark.parametrize("p", [1.5, 2.0, 3.0, 5.0])
def test_exponent_vanishes_at_critical_dimension(p):
    rep = lower_bound_exponent(p, critical_dimension(p))
    assert abs(rep.exponent) <= 1e-12
    assert rep.regime == LOGARITHMIC


def test_regimes():
    assert lower_bound_exponent(2, 3).regime == POLYNOMIAL
    assert lower_bound_exponent(2, 11).regime == BOUNDED_ADMISSIBLE
    assert lower_bound_exponent(2, 3).exponent == pytest.approx((4 - 3 + 2 * math.sqrt(2)) / 2)


def test_invalid_arguments():
    with pytest.raises(ValueError):
        lower_bound_exponent(1.0, 3)
    with pytest.raises(ValueError):
        lower_bound_exponent(2.0, 1)


@settings(max_examples=60, deadline=None)
@given(st.floats(1.1, 8.0), st.floats(2.0, 30.0), st.floats(0.01, 5.0))
def test_exponent_decreasing_in_dimension(p, n, dn):
    # d gamma / dn = (1 / sqrt((n-1)(p-1)) - 1) / p is negative once (n-1)(p-1) > 1
    if (n - 1) * (p - 1) > 1.0:
        assert growth_exponent(p, n + dn) < growth_exponent(p, n)


def test_exponent_increases_below_unit_product():
    assert growth_exponent(1.5, 2.5) > growth_exponent(1.5, 2.0)


@settings(max_examples=40, deadline=None)
@given(st.floats(1.1, 8.0))
def test_exponent_sign_matches_regime(p):
    n_star = critical_dimension(p)
    below, above = lower_bound_exponent(p, max(2.0, n_star - 0.5)), lower_bound_exponent(p, n_star + 0.5)
    assert below.exponent > 0 and below.regime == POLYNOMIAL
    assert above.exponent < 0 and above.regime == BOUNDED_ADMISSIBLE


@pytest.mark.parametrize("gamma", [0.5, 1.0, 2.3])
def test_growth_fit_calibration(gamma):
    rep = lower_bound_exponent(2.0, 3.0)
    rep.exponent = gamma
    fit = growth_fit(lambda r: r[None] ** gamma, rep, radii=np.geomspace(1, 100, 20))
    assert fit.slope == pytest.approx(gamma, abs=1e-3)
    assert fit.passed


def test_growth_fit_flags_decay():
    rep = lower_bound_exponent(2.0, 3.0)
    fit = growth_fit(lambda r: (np.sin(r) / r)[None], rep, radii=np.geomspace(1.3, 40, 20))
    assert not fit.passed and fit.verdict == "inconsistent with stability"


def test_growth_fit_constant_is_vacuous():
    rep = lower_bound_exponent(2.0, 3.0)
    fit = growth_fit(lambda r: np.ones((1, np.size(r))), rep, radii=np.geomspace(1, 20, 5))
    assert fit.passed and fit.verdict.startswith("bound vacuous")


def test_growth_fit_needs_a_decade():
    rep = lower_bound_exponent(2.0, 3.0)
    with pytest.raises(InsufficientRange):
        growth_fit(lambda r: r[None], rep, radii=np.geomspace(1, 5, 5))


def _synthetic_linear(n, p, R=4.0, N=400):
    # u = r: S = 1, closed-form integrals
    r = np.linspace(0, R, N + 1)
    prof = Profile1D(t=r, u=r[None].copy(), du=np.ones((1, N + 1)), phi=make_phi("plaplacian", p),
                     nonlinearity=nlm.zero(1), bc=((None, R),), residual_norm=0.0)
    return RadialSolution(prof, n, p)


def test_holder_chain_synthetic_closed_form():
    rad = _synthetic_linear(3, 2.0)
    hc = holder_chain_check(rad, 1.0, 4.0)
    assert hc.power_integral == pytest.approx(3 * (4 ** (1 / 3) - 1), rel=1e-10)
    assert hc.weighted_integral == pytest.approx(0.75, rel=1e-10)
    assert hc.derivative_integral == pytest.approx(3.0, rel=1e-10)
    assert hc.holds


def test_holder_chain_degenerate_interval():
    hc = holder_chain_check(_synthetic_linear(3, 2.0), 2.0, 2.0)
    assert hc.holds and hc.power_integral == 0.0


@pytest.mark.parametrize("p", [2.0, 1.5])
def test_holder_chain_on_solved_input(gl2, p):
    rad = solve_radial(make_phi("plaplacian", p), gl2, 3, 10.0, [0.5, -0.3], N=800)
    hc = holder_chain_check(rad, 1.0, 8.0)
    assert hc.holds and hc.chained_holds


def test_growth_fit_on_radial_solution(radial_ac):
    rep = lower_bound_exponent(2.0, 3.0)
    fit = growth_fit(radial_ac, rep, radii=np.geomspace(0.5, 5.0, 10))
    assert np.isfinite(fit.slope) or fit.verdict.startswith("bound vacuous")
