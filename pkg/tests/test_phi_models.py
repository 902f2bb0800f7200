import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quasilab.errors import SingularGradient
from quasilab.phi_models import (
    LAPLACIAN,
    P_LAPLACIAN,
    alpha_star,
    check_conditions_AB,
    derivative_error,
    diffusion_form,
    diffusion_matrix,
    log_grid,
    make_phi,
    ratio_bounds,
    structural_margin,
)

BUILTINS = [("laplacian", None, 0.0), ("meancurvature", None, 0.0), ("plaplacian", 3.0, 0.0),
            ("plaplacian", 1.5, 0.0), ("plaplacian", 3.0, 0.1), ("plaplacian", 4.0, 0.0)]


def build(kind, p, eps):
    return make_phi(kind, p=p, epsilon=eps)


def test_laplacian_values():
    phi = make_phi("laplacian")
    assert (phi.phi(4.0), phi.dphi(4.0), phi.ddphi(4.0)) == (4.0, 1.0, 0.0)


def test_mean_curvature_values():
    phi = make_phi("mean_curvature")
    assert phi.phi(3.0) == pytest.approx(2.0, abs=1e-15)
    assert phi.dphi(3.0) == pytest.approx(0.5, abs=1e-15)


def test_p2_matches_laplacian():
    s = log_grid(1e-6, 1e6, 200)
    lap, p2 = make_phi("laplacian"), make_phi("plaplacian", 2)
    np.testing.assert_allclose(p2.phi(s), lap.phi(s), rtol=1e-14)
    np.testing.assert_allclose(p2.dphi(s), lap.dphi(s), rtol=1e-14)
    np.testing.assert_allclose(p2.ddphi(s), lap.ddphi(s), atol=1e-14)


@pytest.mark.parametrize("p,eps", [(1.0, 0.0), (0.5, 0.0), (3.0, -0.1)])
def test_rejects_bad_parameters(p, eps):
    with pytest.raises(ValueError):
        make_phi("plaplacian", p=p, epsilon=eps)


def test_rejects_unknown_family():
    with pytest.raises(ValueError):
        make_phi("biharmonic")


@pytest.mark.parametrize("kind,p,eps", BUILTINS)
def test_structural_positivity(kind, p, eps):
    phi = build(kind, p, eps)
    marg = structural_margin(phi, log_grid(1e-8, 1e8, 4000))
    assert marg["phi"] > 0 and marg["dphi"] > 0 and marg["flux_slope"] > 0
    assert marg["phi_at_zero"] == 0.0


@pytest.mark.parametrize("kind,p,eps", BUILTINS)
def test_derivatives_match_finite_differences(kind, p, eps):
    e1, e2 = derivative_error(build(kind, p, eps))
    assert e1 <= 1e-6 and e2 <= 1e-6


def test_diffusion_matrix_laplacian_identity():
    np.testing.assert_array_equal(diffusion_matrix(make_phi("laplacian"), [0.3, -1.0, 2.0]).matrix, np.eye(3))


def test_diffusion_matrix_p3_closed_form():
    np.testing.assert_allclose(diffusion_matrix(make_phi("plaplacian", 3), [1.0, 0.0]).matrix, np.diag([2.0, 1.0]))


def test_diffusion_matrix_mean_curvature_at_zero():
    np.testing.assert_allclose(diffusion_matrix(make_phi("meancurvature"), [0.0, 0.0]).matrix, np.eye(2))


def test_diffusion_matrix_singular_gradient():
    with pytest.raises(SingularGradient):
        diffusion_matrix(make_phi("plaplacian", 1.5), [0.0, 0.0])


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(BUILTINS),
       st.lists(st.floats(-5, 5), min_size=3, max_size=3),
       st.lists(st.floats(-5, 5), min_size=3, max_size=3))
def test_diffusion_quadratic_form_expansion(model, eta, zeta):
    phi = build(*model)
    eta, zeta = np.array(eta), np.array(zeta)
    if phi.singular_at_zero and eta @ eta < 1e-12:
        return
    mat = diffusion_matrix(phi, eta)
    assert np.array_equal(mat.matrix, mat.matrix.T)
    s = eta @ eta
    d2 = phi.ddphi(s) if s > 0 else 0.0
    expected = 2 * d2 * (zeta @ eta) ** 2 + phi.dphi(s) * (zeta @ zeta)
    assert mat.quadratic_form(zeta) == pytest.approx(expected, rel=1e-12, abs=1e-12)
    assert diffusion_form(phi, eta, zeta) == pytest.approx(expected, rel=1e-12, abs=1e-12)
    if s > 0 or not (phi.kind == P_LAPLACIAN and phi.p > 2 and phi.epsilon == 0):
        assert mat.min_eigenvalue() > 0


@pytest.mark.parametrize("kind,p,expected", [("laplacian", None, 2.0), ("meancurvature", None, 2.0),
                                             ("plaplacian", 3.0, 3.0), ("plaplacian", 4.0, 4.0)])
def test_alpha_star_values(kind, p, expected):
    assert alpha_star(make_phi(kind, p=p)) == pytest.approx(expected, abs=1e-6)


@pytest.mark.parametrize("kind,p,eps", BUILTINS)
def test_alpha_star_refinement_is_monotone(kind, p, eps):
    """A refined grid contains the coarse one, so the supremum cannot decrease."""
    phi = build(kind, p, eps)
    coarse = log_grid(1e-8, 1e8, 1001)
    fine = log_grid(1e-8, 1e8, 4001)
    assert alpha_star(phi, fine) >= alpha_star(phi, coarse) - 1e-14


def test_mean_curvature_ratio_range():
    lo, hi = ratio_bounds(make_phi("meancurvature"))
    assert hi == pytest.approx(2.0, abs=1e-6)
    assert 1.0 < lo < 1.001


def test_plaplacian_eps_value_reported():
    value = alpha_star(make_phi("plaplacian", 3, epsilon=0.1))
    assert 2.0 <= value <= 3.0 + 1e-12


def test_condition_a_mean_curvature():
    rep = check_conditions_AB(make_phi("meancurvature"), 1000)
    assert rep.condition == "A" and not rep.violated
    assert 0 < rep.c1 <= rep.c2 < math.inf


def test_condition_b_plaplacian_eps():
    rep = check_conditions_AB(make_phi("plaplacian", 3, epsilon=0.1), 1000)
    assert rep.condition == "B" and not rep.violated and rep.c1 > 0


def test_condition_b_laplacian_constants():
    rep = check_conditions_AB(make_phi("laplacian"), 500)
    assert rep.condition == "B" and rep.p == 2.0
    assert rep.c1 == pytest.approx(1.0) and rep.c2 == pytest.approx(1.0)


def test_condition_rejects_small_sample():
    with pytest.raises(ValueError):
        check_conditions_AB(make_phi("laplacian"), 50)


def test_kind_constants():
    assert make_phi("Laplacian").kind == LAPLACIAN
    assert make_phi("p-Laplacian", 2.5).kind == P_LAPLACIAN
