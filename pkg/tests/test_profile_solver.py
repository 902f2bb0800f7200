import numpy as np
import pytest

from quasilab import nonlinearity as nlm
from quasilab.phi_models import make_phi
from quasilab.profile_solver import (
    first_integral_deficit,
    profile_from_csv,
    profile_residual,
    profile_to_csv,
    radial_residual,
    solve_profile,
    solve_radial,
)

SQRT2 = np.sqrt(2.0)


def test_allen_cahn_heteroclinic_matches_tanh(ac_profiles):
    prof = ac_profiles["laplacian"]
    assert np.max(np.abs(prof.u[0] - np.tanh(prof.t / SQRT2))) <= 1e-6
    assert np.max(np.abs(first_integral_deficit(prof))) <= 1e-8
    assert prof.residual_norm <= 1e-10


@pytest.mark.parametrize("name", ["laplacian", "meancurvature", "plaplacian3"])
def test_profiles_monotone_and_odd(ac_profiles, name):
    prof = ac_profiles[name]
    tol = 1e-8 if name == "plaplacian3" else 0.0
    assert np.all(np.diff(prof.u[0]) >= -tol)
    np.testing.assert_allclose(prof.u[0], -prof.u[0][::-1], atol=1e-6)


@pytest.mark.parametrize("name", ["laplacian", "meancurvature"])
def test_first_integral_constant_other_families(ac_profiles, name):
    assert np.max(np.abs(first_integral_deficit(ac_profiles[name]))) <= 1e-6


def test_constant_boundary_data_gives_constant(laplacian, allen_cahn):
    prof = solve_profile(laplacian, allen_cahn, [(1.0, 1.0)], L=10, N=256)
    np.testing.assert_allclose(prof.u, 1.0, atol=1e-12)


def test_refinement_ratio(laplacian, allen_cahn):
    errs = []
    for N in (256, 512):
        prof = solve_profile(laplacian, allen_cahn, [(-1, 1)], L=20, N=N)
        errs.append(np.max(np.abs(prof.u[0] - np.tanh(prof.t / SQRT2))))
    assert errs[0] / errs[1] >= 8.0


def test_gl_profile_first_integral(gl_profile):
    assert np.max(np.abs(first_integral_deficit(gl_profile))) <= 1e-6
    assert np.max(np.abs(profile_residual(gl_profile))) <= 1e-8


def test_csv_round_trip(ac_profiles, laplacian, allen_cahn):
    prof = ac_profiles["laplacian"]
    back = profile_from_csv(profile_to_csv(prof), laplacian, allen_cahn)
    np.testing.assert_array_equal(back.u, prof.u)
    np.testing.assert_array_equal(back.du, prof.du)
    np.testing.assert_array_equal(back.t, prof.t)


def test_bad_inputs(laplacian, allen_cahn):
    with pytest.raises(ValueError):
        solve_profile(laplacian, allen_cahn, [(-1, 1), (0, 0)])
    with pytest.raises(ValueError):
        solve_profile(laplacian, allen_cahn, [(-1, 1)], N=101)


def test_radial_constant_source_quadratic(laplacian):
    rad = solve_radial(laplacian, nlm.constant_source(1.0), 3, 2.0, [0.0], N=200)
    exact = (4.0 - rad.r**2) / 6.0
    np.testing.assert_allclose(rad.u[0], exact, atol=1e-10)
    assert np.max(np.abs(radial_residual(rad))) <= 1e-8


def test_radial_allen_cahn_converges(radial_ac):
    assert radial_ac.profile.residual_norm <= 1e-8
    assert radial_ac.du[0, 0] == 0.0
    assert radial_ac.value_at(10.0)[0] == pytest.approx(0.5)


def test_radial_p_continuation(allen_cahn):
    phi = make_phi("plaplacian", 1.5)
    rad = solve_radial(phi, allen_cahn, 3, 10.0, [0.5], N=400, init=np.ones((1, 401)))
    assert rad.p == 1.5
    assert rad.profile.residual_norm <= 1e-8


def test_radial_rejects_low_dimension(laplacian, allen_cahn):
    with pytest.raises(ValueError):
        solve_radial(laplacian, allen_cahn, 1, 5.0, [0.0])
