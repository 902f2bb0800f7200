"""Numerical laboratory for quasilinear elliptic systems -div(Phi'(|grad u_i|^2) grad u_i) = H_i(u)."""
from .errors import QuasilabError
from .grid_solver import GridField, load_field, perturb, planar_field, save_field, solve_box
from .liouville_bounds import ExponentReport, critical_dimension, growth_fit, holder_chain_check, lower_bound_exponent
from .nonlinearity import Nonlinearity, make_nonlinearity
from .phi_models import PhiModel, alpha_star, make_phi
from .profile_solver import Profile1D, RadialSolution, solve_profile, solve_radial

__version__ = "0.1.0"

__all__ = [
    "ExponentReport",
    "GridField",
    "Nonlinearity",
    "PhiModel",
    "Profile1D",
    "QuasilabError",
    "RadialSolution",
    "alpha_star",
    "critical_dimension",
    "growth_fit",
    "holder_chain_check",
    "load_field",
    "lower_bound_exponent",
    "make_nonlinearity",
    "make_phi",
    "perturb",
    "planar_field",
    "save_field",
    "solve_box",
    "solve_profile",
    "solve_radial",
]
