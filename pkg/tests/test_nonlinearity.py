import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quasilab import nonlinearity as nlm
from quasilab.errors import MissingAntiderivative
from quasilab.nonlinearity import (
    SignPattern,
    coupling_matrix,
    coupling_products,
    coupling_signs,
    is_orientable,
    is_symmetric,
    jacobian_error,
    potential_gradient_error,
    random_states,
)

BUILTINS = [nlm.allen_cahn(), nlm.ginzburg_landau(2), nlm.ginzburg_landau(3), nlm.bose_einstein(1.5),
            nlm.coupled_pair(0.5), nlm.coupled_pair(-0.7), nlm.zero(2), nlm.constant_source(2.0, 2)]


@pytest.mark.parametrize("nl", BUILTINS, ids=lambda nl: f"{nl.name}-{nl.m}")
def test_potential_gradient_is_H(nl):
    pts = random_states(nl.m, 100, seed=1)
    assert potential_gradient_error(nl, pts) <= 1e-6


@pytest.mark.parametrize("nl", BUILTINS, ids=lambda nl: f"{nl.name}-{nl.m}")
def test_jacobian_matches_finite_differences(nl):
    pts = random_states(nl.m, 100, seed=2)
    assert jacobian_error(nl, pts) <= 1e-6


@pytest.mark.parametrize("nl", BUILTINS, ids=lambda nl: f"{nl.name}-{nl.m}")
def test_builtins_symmetric(nl):
    ok, asym = is_symmetric(nl, random_states(nl.m, 100, seed=3))
    assert ok and asym <= 1e-12


def test_asymmetric_custom():
    nl = nlm.custom("skew", 2, lambda u: np.stack([u[1], np.zeros_like(u[0])]),
                    lambda u: np.stack([np.stack([np.zeros_like(u[0]), np.ones_like(u[0])]),
                                        np.stack([np.zeros_like(u[0]), np.zeros_like(u[0])])]))
    ok, asym = is_symmetric(nl, random_states(2, 10))
    assert not ok and asym == pytest.approx(1.0)
    with pytest.raises(MissingAntiderivative):
        nl.potential(np.zeros((2, 1)))


def test_gl_values():
    gl = nlm.ginzburg_landau(2)
    u = np.array([[1.0], [0.0]])
    np.testing.assert_allclose(gl.H(u)[:, 0], [0.0, 0.0])
    assert gl.potential(u)[0] == pytest.approx(0.0)
    assert gl.potential(np.zeros((2, 1)))[0] == pytest.approx(-0.25)


def test_gl_cross_partials():
    gl = nlm.ginzburg_landau(2)
    u = random_states(2, 20, seed=4)
    jac = gl.jacobian(u)
    np.testing.assert_allclose(jac[0, 1], -2 * u[0] * u[1])
    np.testing.assert_allclose(jac[1, 0], -2 * u[0] * u[1])


def test_allen_cahn_values():
    ac = nlm.allen_cahn()
    u = np.zeros((1, 1))
    assert ac.H(u)[0, 0] == 0.0
    assert ac.potential(u)[0] == pytest.approx(-0.25)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-3, 3), min_size=3, max_size=3))
def test_gl_potential_nonpositive(u):
    gl = nlm.ginzburg_landau(3)
    assert gl.potential(np.array(u)[:, None])[0] <= 0.0


@settings(max_examples=50, deadline=None)
@given(st.floats(-2, 2).filter(lambda k: abs(k) > 1e-3), st.floats(-3, 3), st.floats(-3, 3))
def test_coupled_pair_supremum_is_zero(kappa, a, b):
    nl = nlm.coupled_pair(kappa)
    assert nl.potential(np.array([[a], [b]]))[0] <= 1e-12
    amp = nlm.coupled_pair_amplitude(kappa)
    peak = np.array([[amp], [np.sign(kappa) * amp]])
    assert nl.potential(peak)[0] == pytest.approx(0.0, abs=1e-12)
    np.testing.assert_allclose(nl.H(peak)[:, 0], 0.0, atol=1e-12)


def test_coupled_pair_exact_kink_solves_system():
    kappa = -0.4
    nl = nlm.coupled_pair(kappa)
    amp = nlm.coupled_pair_amplitude(kappa)
    t = np.linspace(-5, 5, 101)
    u1 = amp * np.tanh(amp * t / np.sqrt(2))
    d2 = -amp**3 * np.tanh(amp * t / np.sqrt(2)) / np.cosh(amp * t / np.sqrt(2)) ** 2
    u = np.stack([u1, -u1])
    np.testing.assert_allclose(-np.stack([d2, -d2]), nl.H(u), atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from([nlm.ginzburg_landau(2), nlm.coupled_pair(0.3), nlm.bose_einstein(2.0)]),
       st.lists(st.floats(-2, 2), min_size=2, max_size=2))
def test_symmetric_root_equals_abs(nl, u):
    u = np.array(u)[:, None]
    c = coupling_matrix(nl, u)
    jac = nl.jacobian(u)
    off = ~np.eye(2, dtype=bool)
    np.testing.assert_allclose(c[off], np.abs(jac[off]), atol=1e-12)
    np.testing.assert_allclose(np.diagonal(c, axis1=0, axis2=1), np.diagonal(jac, axis1=0, axis2=1))
    assert np.all(coupling_products(nl, u)[off] >= 0)


def test_bec_cross_pattern_orientable():
    rep = is_orientable(nlm.bose_einstein(1.0), [(0.1, 2.0), (0.1, 2.0)], SignPattern((1, -1)))
    assert rep.orientable is True


def test_decoupled_orientable_any_pattern():
    ac_pair = nlm.coupled_pair(0.0)
    for pattern in [(1, 1), (1, -1), (-1, 1)]:
        assert is_orientable(ac_pair, [(-2, 2), (-2, 2)], SignPattern(pattern)).orientable is True


def test_positive_coupling_cross_pattern_not_orientable():
    rep = is_orientable(nlm.coupled_pair(0.5), [(-2, 2), (-2, 2)], SignPattern((1, -1)))
    assert rep.orientable is False and (0, 1) in rep.violating_pairs


def test_indeterminate_coupling_sign():
    rep = is_orientable(nlm.ginzburg_landau(2), [(-1, 1), (-1, 1)], SignPattern((1, 1)))
    assert rep.orientable is None and rep.indeterminate_pairs


def test_coupling_signs_zero_and_nan():
    signs = coupling_signs(nlm.ginzburg_landau(2), random_states(2, 50, seed=5))
    assert np.isnan(signs[0, 1])
    assert np.all(coupling_signs(nlm.zero(2), random_states(2, 5)) == 0)


def test_sign_pattern_validation():
    with pytest.raises(ValueError):
        SignPattern((1, 0))


def test_catalog():
    cat = nlm.builtin_nonlinearities()
    assert {"allen_cahn", "ginzburg_landau", "coupled_pair"} <= set(cat)
    assert nlm.make_nonlinearity("ginzburg_landau", m=3).m == 3
    with pytest.raises(ValueError):
        nlm.make_nonlinearity("unknown")
