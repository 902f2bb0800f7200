import math

import numpy as np
import pytest

from quasilab import nonlinearity as nlm
from quasilab.grid_solver import planar_field, solve_box
from quasilab.phi_models import make_phi
from quasilab.profile_solver import solve_profile, solve_radial

SQRT2 = math.sqrt(2.0)
PLANAR_DIRECTION = (0.6, 0.8)


@pytest.fixture(scope="session")
def laplacian():
    return make_phi("laplacian")


@pytest.fixture(scope="session")
def mean_curvature():
    return make_phi("meancurvature")


@pytest.fixture(scope="session")
def p3():
    return make_phi("plaplacian", 3)


@pytest.fixture(scope="session")
def families(laplacian, mean_curvature, p3):
    return {"laplacian": laplacian, "meancurvature": mean_curvature, "plaplacian3": p3}


@pytest.fixture(scope="session")
def allen_cahn():
    return nlm.allen_cahn()


@pytest.fixture(scope="session")
def gl2():
    return nlm.ginzburg_landau(2)


@pytest.fixture(scope="session")
def ac_profiles(families, allen_cahn):
    return {name: solve_profile(phi, allen_cahn, [(-1, 1)], L=20, N=2048) for name, phi in families.items()}


@pytest.fixture(scope="session")
def ac_planar(ac_profiles):
    """Planar Allen-Cahn fields on [-6, 6]^2 with h = 0.1, keyed by family."""
    return {name: planar_field(prof, PLANAR_DIRECTION, [(-6, 6), (-6, 6)], 0.1) for name, prof in ac_profiles.items()}


@pytest.fixture(scope="session")
def gl_profile(laplacian, gl2):
    return solve_profile(laplacian, gl2, [(-0.6, 0.6), (-0.8, 0.8)], L=20, N=2048)


@pytest.fixture(scope="session")
def gl_planar(gl_profile):
    return planar_field(gl_profile, PLANAR_DIRECTION, [(-10, 10), (-10, 10)], 0.1)


def coupled_fixture(phi, kappa, box=((-5, 5), (-5, 5)), spacing=0.1):
    nl = nlm.coupled_pair(kappa)
    amp = nlm.coupled_pair_amplitude(kappa)
    sign = 1.0 if kappa > 0 else -1.0
    prof = solve_profile(phi, nl, [(-amp, amp), (-sign * amp, sign * amp)], L=20, N=1024)
    return nl, prof, planar_field(prof, PLANAR_DIRECTION, list(box), spacing)


@pytest.fixture(scope="session")
def coupled_positive(laplacian):
    return coupled_fixture(laplacian, 0.5)


@pytest.fixture(scope="session")
def coupled_negative(laplacian):
    return coupled_fixture(laplacian, -0.5)


def curved_bc(x):
    return np.tanh((x[1] - 0.05 * x[0] ** 2) / SQRT2)[None]


@pytest.fixture(scope="session")
def curved_field(laplacian, allen_cahn):
    """Newton-solved Allen-Cahn field with bent boundary data: monotone in y, not planar."""
    return solve_box(laplacian, allen_cahn, [(-5, 5), (-5, 5)], 0.1, curved_bc)


@pytest.fixture(scope="session")
def radial_ac(laplacian, allen_cahn):
    return solve_radial(laplacian, allen_cahn, 3, 10.0, [0.5], N=800, init=np.ones((1, 801)))


@pytest.fixture(scope="session")
def radial_gl(laplacian, gl2):
    return solve_radial(laplacian, gl2, 3, 10.0, [0.5, -0.3], N=800)


ACCEPTANCE_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = []


@pytest.fixture
def acceptance(request):
    """Record one summary line per acceptance criterion."""
    lines = request.config.stash[ACCEPTANCE_KEY]

    def record(number, title, passed, details, seconds):
        line = f"criterion {number:2d} {'PASS' if passed else 'FAIL'}  {title}: {details} [{seconds:.2f} s]"
        lines.append((number, line))
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(ACCEPTANCE_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(lines):
            terminalreporter.write_line(line)
