import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quasilab import nonlinearity as nlm
from quasilab.errors import CouplingSignIndeterminate, NegativeCouplingProduct, NotMonotone
from quasilab.grid_solver import constant_field, load_field
from quasilab.phi_models import make_phi
from quasilab.stability_lab import (
    TestTuple,
    geometric_poincare_gap,
    gradient_angle,
    lr_check,
    monotone_certificate,
    piecewise_power_test,
    radial_stability_gap,
    random_test_tuples,
    save_certificate,
    sigma_constancy,
    smallest_eigenvalue,
    smooth_radial_test,
    stability_quadratic_gap,
)

FAMILIES = ["laplacian", "meancurvature", "plaplacian3"]
TANGENT = (0.8, -0.6)


def _floor(name):
    return 1e-4 if name == "plaplacian3" else None


def test_zero_tuple_has_zero_gap(ac_planar, laplacian, allen_cahn):
    fld = ac_planar["laplacian"]
    zero = TestTuple(np.zeros((1,) + fld.shape), np.zeros((1, 2) + fld.shape))
    gap = stability_quadratic_gap(fld, laplacian, allen_cahn, [zero])
    assert gap.gaps[0] == 0.0


@settings(max_examples=10, deadline=None)
@given(st.floats(-5, 5), st.integers(0, 10_000))
def test_quadratic_form_is_homogeneous(scale, seed):
    phi = make_phi("laplacian")
    nl = nlm.allen_cahn()
    fld = constant_field([0.3], [(-2, 2), (-2, 2)], 0.1)
    t = random_test_tuples(fld, count=1, seed=seed)[0]
    scaled = TestTuple(scale * t.values, scale * t.grads, t.kind)
    g1, g2 = stability_quadratic_gap(fld, phi, nl, [t, scaled]).gaps
    assert g2 == pytest.approx(scale**2 * g1, rel=1e-10, abs=1e-14)


@pytest.mark.parametrize("name", FAMILIES)
def test_planar_gaps_nonnegative(ac_planar, families, allen_cahn, name):
    fld = ac_planar[name]
    tests = random_test_tuples(fld, count=50, seed=0)
    gap = stability_quadratic_gap(fld, families[name], allen_cahn, tests)
    scale = max(np.max(np.abs(gap.rhs)), 1.0)
    assert np.min(gap.gaps) >= -1e-8 * scale


@pytest.mark.parametrize("pair", ["coupled_positive", "coupled_negative"])
def test_system_gaps_nonnegative(request, laplacian, pair):
    nl, prof, fld = request.getfixturevalue(pair)
    gap = stability_quadratic_gap(fld, laplacian, nl, random_test_tuples(fld, 50, seed=1))
    assert np.min(gap.gaps) >= -1e-8 * max(np.max(np.abs(gap.rhs)), 1.0)
    assert abs(smallest_eigenvalue(prof, laplacian, nl).value) <= 1e-4


def test_vector_kink_is_unstable(gl_profile, gl_planar, laplacian, gl2):
    # perpendicular mode sech(t / sqrt 2) has eigenvalue exactly -1/2
    assert smallest_eigenvalue(gl_profile, laplacian, gl2).value == pytest.approx(-0.5, abs=1e-5)
    gap = stability_quadratic_gap(gl_planar, laplacian, gl2, random_test_tuples(gl_planar, 50, seed=1))
    assert np.min(gap.gaps) < 0


def test_negative_coupling_product_rejected(laplacian):
    def jac(u):
        z, o = np.zeros_like(u[0]), np.ones_like(u[0])
        return np.stack([np.stack([z, o]), np.stack([-o, z])])

    nl = nlm.custom("skew", 2, lambda u: np.zeros_like(u), jac)
    fld = constant_field([0.0, 0.0], [(-1, 1), (-1, 1)], 0.1)
    with pytest.raises(NegativeCouplingProduct):
        stability_quadratic_gap(fld, laplacian, nl, random_test_tuples(fld, 1))


@pytest.mark.parametrize("name", FAMILIES)
def test_translation_mode_near_zero(ac_profiles, families, allen_cahn, name):
    res = smallest_eigenvalue(ac_profiles[name], families[name], allen_cahn)
    assert abs(res.value) <= 1e-4


def test_constant_well_is_stable_and_saddle_unstable(laplacian, allen_cahn):
    well = smallest_eigenvalue(constant_field([1.0], [(-5, 5), (-5, 5)], 0.25), laplacian, allen_cahn)
    top = smallest_eigenvalue(constant_field([0.0], [(-5, 5), (-5, 5)], 0.25), laplacian, allen_cahn)
    assert well.value > 0
    assert top.value < 0
    # continuum Dirichlet value 2 (pi / 10)^2 - 1, up to O(h^2)
    assert top.value == pytest.approx(2 * (math.pi / 10) ** 2 - 1, abs=0.2 * 0.25**2)


def test_planar_box_eigenvalue_nonnegative(ac_planar, laplacian, allen_cahn):
    assert smallest_eigenvalue(ac_planar["laplacian"], laplacian, allen_cahn).value >= -1e-6


def test_certificate_on_planar(ac_planar, families, allen_cahn):
    for name in FAMILIES:
        cert = monotone_certificate(ac_planar[name], families[name], allen_cahn, axis=1, floor=_floor(name))
        assert cert.signs == (1,)


def test_certificate_rejects_constant(laplacian, allen_cahn):
    with pytest.raises(NotMonotone):
        monotone_certificate(constant_field([1.0], [(-2, 2), (-2, 2)], 0.1), laplacian, allen_cahn, axis=0)


def test_certificate_signs_for_coupled_pairs(coupled_positive, coupled_negative, laplacian):
    nl, _, fld = coupled_positive
    assert monotone_certificate(fld, laplacian, nl, axis=1).signs == (1, 1)
    nl, _, fld = coupled_negative
    cert = monotone_certificate(fld, laplacian, nl, axis=1)
    assert cert.signs == (1, -1)
    assert cert.coupling_margin >= 0


def test_certificate_round_trip(tmp_path, ac_planar, laplacian, allen_cahn):
    fld = ac_planar["laplacian"]
    cert = monotone_certificate(fld, laplacian, allen_cahn, axis=1)
    save_certificate(cert, fld, tmp_path / "cert.bin")
    back = load_field(tmp_path / "cert.bin")
    np.testing.assert_array_equal(back.values, cert.phi_values)
    assert back.metadata["signs"] == [1]


@pytest.mark.parametrize("name", FAMILIES)
def test_sigma_constant_on_planar(ac_planar, families, allen_cahn, name):
    q = sigma_constancy(ac_planar[name], families[name], allen_cahn, axis=1, eta=(1.0, 0.0), floor=_floor(name))
    assert q.max_variation <= 1e-6


def test_sigma_varies_on_curved_field(curved_field, laplacian, allen_cahn):
    q = sigma_constancy(curved_field, laplacian, allen_cahn, axis=1, eta=(1.0, 0.0))
    assert q.max_variation > 1e-2
    assert q.residual_norm <= 1e-4


def test_sigma_rejects_eta_along_axis(ac_planar, laplacian, allen_cahn):
    with pytest.raises(ValueError):
        sigma_constancy(ac_planar["laplacian"], laplacian, allen_cahn, axis=1, eta=(0.0, 1.0))


def test_angle_parallel_and_antiparallel(coupled_positive, coupled_negative):
    nl, _, fld = coupled_positive
    pos = gradient_angle(fld, (0, 1), nl)
    assert pos.theta_star == 0.0 and pos.max_deviation <= 1e-3
    nl, _, fld = coupled_negative
    neg = gradient_angle(fld, (0, 1), nl)
    assert neg.theta_star == pytest.approx(math.pi) and neg.max_deviation <= 1e-3


def test_angle_indeterminate_without_coupling(coupled_positive):
    _, _, fld = coupled_positive
    with pytest.raises(CouplingSignIndeterminate):
        gradient_angle(fld, (0, 1), nlm.zero(2))


@pytest.mark.parametrize("name", FAMILIES)
def test_poincare_planar_terms_small(ac_planar, families, allen_cahn, name):
    fld = ac_planar[name]
    h = fld.spacing[0]
    tests = random_test_tuples(fld, 20, seed=3, kinds=("bump",))
    gap = geometric_poincare_gap(fld, families[name], allen_cahn, tests, floor=_floor(name))
    assert np.max(gap.curvature) <= 50 * h * h
    assert np.max(gap.tangential) <= 50 * h * h
    assert np.min(gap.gaps) >= -50 * h * h


def test_poincare_curved_field(curved_field, laplacian, allen_cahn):
    tests = random_test_tuples(curved_field, 20, seed=4, kinds=("bump",))
    gap = geometric_poincare_gap(curved_field, laplacian, allen_cahn, tests)
    assert np.min(gap.gaps) >= -50 * curved_field.spacing[0] ** 2
    assert np.max(gap.curvature) > 0


def test_radial_gaps_and_lr_bound(radial_ac, allen_cahn):
    assert smallest_eigenvalue(radial_ac, None, allen_cahn).value > 0
    tests = [piecewise_power_test(radial_ac, 3.0, 8.0), smooth_radial_test(9.0)]
    gap = radial_stability_gap(radial_ac, allen_cahn, tests)
    assert np.all(gap.gaps >= 0)
    lr = lr_check(radial_ac, 3.0, 8.0)
    assert lr.holds and lr.lhs_lower <= lr.rhs * (1 + 1e-8)


def test_piecewise_test_function_shape(radial_ac):
    test = piecewise_power_test(radial_ac, 3.0, 8.0)
    a = math.sqrt(2.0)
    np.testing.assert_allclose(test.fn([0.5, 1.0, 2.0, 3.0, 8.0, 9.0]),
                               [1.0, 1.0, 2.0 ** -a, 3.0 ** -a, 0.0, 0.0], atol=1e-10)
    assert test.dfn([2.0])[0] == pytest.approx(-a * 2.0 ** (-a - 1))
