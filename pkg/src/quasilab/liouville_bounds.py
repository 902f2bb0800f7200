"""Exponent calculators for radial stable solutions and the Holder chain behind them."""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np

from .errors import DegenerateDerivative, InsufficientRange
from .profile_solver import RadialSolution
from .stability_lab import _integrate, _radial_interp, _sum_abs_p, lr_check, require_nondegenerate

POLYNOMIAL = "polynomial"
LOGARITHMIC = "logarithmic"
BOUNDED_ADMISSIBLE = "bounded-admissible"
REGIME_TOL = 1e-12
DEFAULT_SLACK = 0.1


def critical_dimension(p):
    """n*(p) = 4p/(p-1) + p."""
    if p <= 1:
        raise ValueError("p must exceed 1")
    return 4.0 * p / (p - 1.0) + p


def growth_exponent(p, n):
    """gamma(n, p) = (p + 2 - n + 2 sqrt((n-1)/(p-1))) / p."""
    if p <= 1:
        raise ValueError("p must exceed 1")
    return (p + 2.0 - n + 2.0 * math.sqrt((n - 1.0) / (p - 1.0))) / p


@dataclass
class ExponentReport:
    p: float
    n: float
    exponent: float
    critical_dimension: float
    regime: str

    def as_dict(self):
        return {"p": self.p, "n": self.n, "exponent": self.exponent,
                "critical_dimension": self.critical_dimension, "regime": self.regime}


def lower_bound_exponent(p, n):
    """Exponent and regime of the lower bound for bounded radial stable solutions.

    ``n`` may be real so that the critical dimension itself can be probed.
    """
    if p <= 1:
        raise ValueError("p must exceed 1")
    if n < 2:
        raise ValueError("n must be at least 2")
    n_star = critical_dimension(p)
    if abs(n - n_star) <= REGIME_TOL * max(1.0, n_star):
        regime = LOGARITHMIC
    elif n < n_star:
        regime = POLYNOMIAL
    else:
        regime = BOUNDED_ADMISSIBLE
    return ExponentReport(float(p), float(n), growth_exponent(p, n), n_star, regime)


@dataclass
class GrowthVerdict:
    radii: np.ndarray
    increments: np.ndarray
    slope: float
    gamma: float
    slack: float
    passed: bool
    verdict: str


def _evaluator(source):
    if isinstance(source, RadialSolution):
        return [source]
    if callable(source):
        return source
    return sorted(source, key=lambda rad: float(rad.r[-1]))


def _values_at(solutions, radius):
    if callable(solutions):
        return np.atleast_1d(np.asarray(solutions(np.array([radius])), dtype=float)).reshape(-1)
    for rad in solutions:
        if rad.r[0] <= radius <= rad.r[-1]:
            return np.atleast_1d(rad.value_at(radius)).reshape(-1)
    raise InsufficientRange(f"no solution covers r = {radius:g}")


def growth_fit(source, report, radii=None, slack=DEFAULT_SLACK, count=20, zero_tol=1e-14):
    """Least-squares slope of log sum_i |u_i(2r) - u_i(r)| against log r, compared with gamma.

    ``source`` is a RadialSolution, a sequence of them over nested domains
    (the first one covering 2r is used), or a callable r -> values of shape
    (m, k) for synthetic fields. The bound is one-sided: pass iff
    slope >= gamma - slack.
    """
    sols = _evaluator(source)
    if radii is None:
        if callable(sols):
            raise ValueError("radii are required for callable sources")
        top = float(max(rad.r[-1] for rad in sols)) / 2.0
        radii = np.geomspace(1.0, max(top, 1.0), count)
    radii = np.asarray(radii, dtype=float)
    if radii.size < 2 or radii[-1] / radii[0] < 10.0 * (1 - 1e-12):
        raise InsufficientRange("radii must span at least one decade")
    inc = np.array([np.sum(np.abs(_values_at(sols, 2 * r) - _values_at(sols, r))) for r in radii])
    gamma = report.exponent
    scale = max(1.0, float(np.max(np.abs(_values_at(sols, radii[0])))))
    if np.all(inc <= zero_tol * scale):
        return GrowthVerdict(radii, inc, float("nan"), gamma, slack, True, "bound vacuous (C forced to 0)")
    if np.any(inc <= 0):
        return GrowthVerdict(radii, inc, float("-inf"), gamma, slack, False, "inconsistent with stability")
    slope = float(np.polyfit(np.log(radii), np.log(inc), 1)[0])
    ok = slope >= gamma - slack
    return GrowthVerdict(radii, inc, slope, gamma, slack, ok,
                         "consistent with stability" if ok else "inconsistent with stability")


@dataclass
class HolderChain:
    r: float
    R: float
    power_integral: float
    weighted_integral: float
    derivative_integral: float
    holder_rhs: float
    slack: float
    holds: bool
    total_variation: float
    chained_rhs: float
    chained_holds: bool
    lr: object = None
    notes: list = field(default_factory=list)


def holder_chain_check(rad, r, R, rel_tol=1e-10):
    """Holder step  int s^(-(n-1)/(p+1)) <= (int 1/(s^(n-1) S))^(1/(p+1)) (int S^(1/p))^(p/(p+1)).

    S = sum_i |u_i'|^p. The chained bound through the LR inequality is
    reported as well and asserted only when the LR bound holds.
    """
    n, p = rad.n, rad.p
    if not (rad.r[0] <= r <= R <= rad.r[-1]) or r < 1.0:
        raise ValueError("need 1 <= r <= R inside the solution's domain")
    if R == r:
        return HolderChain(r, R, 0.0, 0.0, 0.0, 0.0, 0.0, True, 0.0, 0.0, True, None, ["degenerate interval"])
    require_nondegenerate(rad, r, R)
    spl, _ = _radial_interp(rad)
    S = _sum_abs_p(spl, p)
    expo = (n - 1.0) / (p + 1.0)
    lhs = _integrate(lambda s: s ** (-expo), r, R)
    weighted = _integrate(lambda s: 1.0 / (s ** (n - 1) * S(s)), r, R)
    deriv = _integrate(lambda s: S(s) ** (1.0 / p), r, R)
    if not (np.isfinite(weighted) and weighted > 0):
        raise DegenerateDerivative("weighted integral is not finite")
    rhs = weighted ** (1.0 / (p + 1)) * deriv ** (p / (p + 1))
    slack = rhs - lhs
    holds = slack >= -rel_tol * max(abs(lhs), abs(rhs))
    tv = _integrate(lambda s: np.sum(np.abs(spl(s)), axis=0), r, R)
    notes = []
    lr = None
    chained = float("nan")
    chained_ok = True
    try:
        lr = lr_check(rad, r, R)
        a = math.sqrt((n - 1) / (p - 1))
        chained = lr.constant ** (1.0 / (p + 1)) * r ** (-p * a / (p + 1)) * tv ** (p / (p + 1))
        if lr.holds:
            chained_ok = lhs <= chained * (1 + rel_tol)
        else:
            notes.append("LR bound fails for this solution; chained bound not asserted")
    except DegenerateDerivative as exc:
        notes.append(f"LR bound skipped: {exc}")
    return HolderChain(r, R, lhs, weighted, deriv, rhs, slack, bool(holds), tv, chained, bool(chained_ok), lr, notes)
