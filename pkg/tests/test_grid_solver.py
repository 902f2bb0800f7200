import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quasilab.errors import DomainTooSmall
from quasilab.grid_solver import (
    NEWTON,
    PERTURBED,
    PLANAR,
    box_shape,
    constant_field,
    fd_gradients,
    load_field,
    perturb,
    planar_field,
    residual,
    save_field,
    solve_box,
)

SQRT2 = np.sqrt(2.0)


def test_planar_field_matches_closed_form(ac_planar):
    fld = ac_planar["laplacian"]
    x = fld.coords()
    s = 0.6 * x[0] + 0.8 * x[1]
    assert fld.provenance == PLANAR
    np.testing.assert_allclose(fld.values[0], np.tanh(s / SQRT2), atol=1e-6)
    deriv = (1 - np.tanh(s / SQRT2) ** 2) / SQRT2
    np.testing.assert_allclose(fld.grads[0, 0], 0.6 * deriv, atol=1e-6)
    np.testing.assert_allclose(fld.grads[0, 1], 0.8 * deriv, atol=1e-6)


def test_planar_field_is_discrete_solution(ac_planar, laplacian, allen_cahn):
    fld = ac_planar["laplacian"]
    r = residual(fld, laplacian, allen_cahn)
    assert np.max(np.abs(r)) <= 4 * fld.spacing[0] ** 2


def test_planar_domain_too_small(ac_profiles):
    with pytest.raises(DomainTooSmall):
        planar_field(ac_profiles["laplacian"], (1.0, 0.0), [(-30, 30), (-1, 1)], 0.5)


def test_planar_rejects_non_unit_direction(ac_profiles):
    with pytest.raises(ValueError):
        planar_field(ac_profiles["laplacian"], (1.0, 1.0), [(-1, 1), (-1, 1)], 0.5)


def test_box_shape_validation():
    assert box_shape([(-1, 1), (0, 2)], 0.5)[2] == (5, 5)
    with pytest.raises(ValueError):
        box_shape([(-1, 1)], 0.3)


def test_box_solve_reproduces_planar(ac_profiles, laplacian, allen_cahn):
    box = [(-5, 5), (-5, 5)]
    h = 0.1
    planar = planar_field(ac_profiles["laplacian"], (0.6, 0.8), box, h)
    solved = solve_box(laplacian, allen_cahn, box, h, planar)
    assert solved.provenance == NEWTON
    assert np.max(np.abs(solved.values - planar.values)) <= 10 * h**2
    assert solved.metadata["residual"] <= 1e-8


def test_box_solve_mean_curvature(ac_profiles, mean_curvature, allen_cahn):
    box = [(-4, 4), (-4, 4)]
    h = 0.125
    planar = planar_field(ac_profiles["meancurvature"], (1.0, 0.0), box, h)
    solved = solve_box(mean_curvature, allen_cahn, box, h, planar)
    assert np.max(np.abs(solved.values - planar.values)) <= 10 * h**2


def test_box_solve_rejects_coarse_grid(laplacian, allen_cahn):
    with pytest.raises(ValueError):
        solve_box(laplacian, allen_cahn, [(-1, 1), (-1, 1)], 0.1, 0.0)


def test_constant_field_gradients_zero():
    fld = constant_field([0.5, -0.2], [(-1, 1), (-1, 1)], 0.25)
    assert fld.m == 2 and fld.shape == (9, 9)
    assert np.all(fld.grads == 0)


def test_fd_gradients_linear_exact():
    x, y = np.meshgrid(np.linspace(0, 1, 11), np.linspace(0, 2, 21), indexing="ij")
    g = fd_gradients((3 * x - 2 * y)[None], (0.1, 0.1))
    np.testing.assert_allclose(g[0, 0], 3.0, atol=1e-12)
    np.testing.assert_allclose(g[0, 1], -2.0, atol=1e-12)


def test_perturb_zero_amplitude_identity(ac_planar):
    fld = ac_planar["laplacian"]
    same = perturb(fld, 0.0)
    np.testing.assert_array_equal(same.values, fld.values)
    np.testing.assert_array_equal(same.grads, fld.grads)


@settings(max_examples=5, deadline=None)
@given(st.floats(1e-3, 0.5), st.integers(0, 1000))
def test_perturb_gradients_converge(amplitude, seed):
    errs = []
    for h in (0.01, 0.005):
        pert = perturb(constant_field([0.0], [(-2, 2), (-2, 2)], h), amplitude, seed=seed)
        assert pert.provenance == PERTURBED
        fd = fd_gradients(pert.values, pert.spacing)
        errs.append(np.max(np.abs(fd - pert.grads)[..., 2:-2, 2:-2]))
    assert errs[1] <= errs[0] / 3.0


def test_perturb_is_seeded(ac_planar):
    a = perturb(ac_planar["laplacian"], 0.1, seed=3)
    b = perturb(ac_planar["laplacian"], 0.1, seed=3)
    np.testing.assert_array_equal(a.values, b.values)


def test_save_load_round_trip(tmp_path, gl_planar):
    path = tmp_path / "field.bin"
    save_field(gl_planar, path)
    back = load_field(path)
    np.testing.assert_array_equal(back.values, gl_planar.values)
    np.testing.assert_array_equal(back.grads, gl_planar.grads)
    assert back.spacing == gl_planar.spacing and back.lo == gl_planar.lo
    assert back.provenance == gl_planar.provenance


def test_load_rejects_foreign_file(tmp_path):
    p = tmp_path / "x.bin"
    p.write_bytes(b"not a field")
    with pytest.raises(ValueError):
        load_field(p)
