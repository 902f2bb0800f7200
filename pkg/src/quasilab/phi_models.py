"""The scalar function Phi behind div(Phi'(|grad u|^2) grad u).

Built-in families:

    laplacian       Phi(s) = s
    meancurvature   Phi(s) = 2 (sqrt(1 + s) - 1)
    plaplacian      Phi(s) = (2/p) ((eps + s)^(p/2) - eps^(p/2))

Every model exposes vectorised ``phi``, ``dphi`` and ``ddphi`` on s >= 0.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import SingularGradient

LAPLACIAN = "laplacian"
MEAN_CURVATURE = "meancurvature"
P_LAPLACIAN = "plaplacian"
CUSTOM = "custom"

_ALIASES = {
    "laplacian": LAPLACIAN,
    "laplace": LAPLACIAN,
    "meancurvature": MEAN_CURVATURE,
    "mean_curvature": MEAN_CURVATURE,
    "mean-curvature": MEAN_CURVATURE,
    "plaplacian": P_LAPLACIAN,
    "p_laplacian": P_LAPLACIAN,
    "p-laplacian": P_LAPLACIAN,
    "custom": CUSTOM,
}

DEFAULT_S_GRID = (1e-8, 1e8, 10**6)


@dataclass(frozen=True)
class PhiModel:
    kind: str
    p: float | None = None
    epsilon: float = 0.0
    name: str = ""
    _phi: Callable | None = field(default=None, repr=False, compare=False)
    _dphi: Callable | None = field(default=None, repr=False, compare=False)
    _ddphi: Callable | None = field(default=None, repr=False, compare=False)

    def phi(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == LAPLACIAN:
            return s.copy()
        if self.kind == MEAN_CURVATURE:
            # 2 s / (sqrt(1+s) + 1) avoids cancellation for small s
            return 2.0 * s / (np.sqrt(1.0 + s) + 1.0)
        if self.kind == P_LAPLACIAN:
            p, eps = self.p, self.epsilon
            if eps == 0.0:
                return (2.0 / p) * s ** (p / 2.0)
            return (2.0 / p) * eps ** (p / 2.0) * np.expm1((p / 2.0) * np.log1p(s / eps))
        return np.asarray(self._phi(s), dtype=float)

    def dphi(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == LAPLACIAN:
            return np.ones_like(s)
        if self.kind == MEAN_CURVATURE:
            return 1.0 / np.sqrt(1.0 + s)
        if self.kind == P_LAPLACIAN:
            with np.errstate(divide="ignore"):
                return (self.epsilon + s) ** (self.p / 2.0 - 1.0)
        return np.asarray(self._dphi(s), dtype=float)

    def ddphi(self, s):
        s = np.asarray(s, dtype=float)
        if self.kind == LAPLACIAN:
            return np.zeros_like(s)
        if self.kind == MEAN_CURVATURE:
            return -0.5 * (1.0 + s) ** -1.5
        if self.kind == P_LAPLACIAN:
            q = self.p / 2.0 - 1.0
            if q == 0.0:
                return np.zeros_like(s)
            with np.errstate(divide="ignore", invalid="ignore"):
                return q * (self.epsilon + s) ** (q - 1.0)
        return np.asarray(self._ddphi(s), dtype=float)

    def flux_slope(self, s):
        """d/dg [Phi'(g^2) g] = Phi'(s) + 2 s Phi''(s) at s = g^2."""
        s = np.asarray(s, dtype=float)
        if self.kind == P_LAPLACIAN:
            # (eps + s)^(p/2-2) (eps + (p-1) s), finite at s = 0 whenever p >= 2
            with np.errstate(divide="ignore", invalid="ignore"):
                out = (self.epsilon + s) ** (self.p / 2.0 - 2.0) * (self.epsilon + (self.p - 1.0) * s)
            if self.p >= 2.0 and self.epsilon == 0.0:
                out = np.where(s == 0.0, 1.0 if self.p == 2.0 else 0.0, out)
            return out
        return self.dphi(s) + 2.0 * s * self.ddphi(s)

    @property
    def singular_at_zero(self):
        """True when Phi' blows up at s = 0 (degenerate p-Laplacian with p < 2)."""
        return self.kind == P_LAPLACIAN and self.epsilon == 0.0 and self.p < 2.0

    def label(self):
        if self.kind == P_LAPLACIAN:
            return f"plaplacian(p={self.p:g}, eps={self.epsilon:g})"
        return self.name or self.kind


def make_phi(kind, p=None, epsilon=0.0, *, phi=None, dphi=None, ddphi=None, name=""):
    """Build a PhiModel from an operator-family name.

    ``kind`` is one of laplacian, meancurvature, plaplacian, custom (case and
    separators are ignored). Custom models need all three callables.
    """
    key = _ALIASES.get(str(kind).strip().lower().replace(" ", ""))
    if key is None:
        raise ValueError(f"unknown operator family {kind!r}")
    if key == P_LAPLACIAN:
        if p is None or not p > 1.0:
            raise ValueError(f"p-Laplacian needs p > 1, got {p!r}")
        if epsilon < 0.0:
            raise ValueError(f"epsilon must be >= 0, got {epsilon!r}")
        return PhiModel(P_LAPLACIAN, p=float(p), epsilon=float(epsilon), name=name)
    if key == CUSTOM:
        if phi is None or dphi is None or ddphi is None:
            raise ValueError("custom Phi needs phi, dphi and ddphi callables")
        return PhiModel(CUSTOM, p=p, epsilon=float(epsilon), name=name or "custom",
                        _phi=phi, _dphi=dphi, _ddphi=ddphi)
    return PhiModel(key, name=name)


def log_grid(lo=DEFAULT_S_GRID[0], hi=DEFAULT_S_GRID[1], num=DEFAULT_S_GRID[2]):
    return np.logspace(np.log10(lo), np.log10(hi), int(num))


def structural_margin(model, s_grid=None):
    """Minimum over s of Phi, Phi' and Phi' + 2 s Phi''; all must be positive."""
    s = log_grid(num=2000) if s_grid is None else np.asarray(s_grid, dtype=float)
    return {
        "phi": float(np.min(model.phi(s))),
        "dphi": float(np.min(model.dphi(s))),
        "flux_slope": float(np.min(model.flux_slope(s))),
        "phi_at_zero": float(model.phi(np.array(0.0))),
    }


def derivative_error(model, s_grid=None, rel_step=1e-3):
    """Largest relative mismatch between analytic and finite-difference derivatives.

    Uses the five-point central stencil with a step proportional to s. Returns
    (err_dphi, err_ddphi); identically zero second derivatives are compared
    in absolute terms against the scale of Phi'/s.
    """
    s = log_grid(1e-6, 1e6, 200) if s_grid is None else np.asarray(s_grid, dtype=float)
    h = rel_step * s

    def five_point(f):
        return (f(s - 2 * h) - 8 * f(s - h) + 8 * f(s + h) - f(s + 2 * h)) / (12 * h)

    d1, d2 = model.dphi(s), model.ddphi(s)
    fd1, fd2 = five_point(model.phi), five_point(model.dphi)
    den1 = np.abs(d1)
    den2 = np.where(d2 == 0.0, np.abs(d1) / s, np.abs(d2))
    return float(np.max(np.abs(fd1 - d1) / den1)), float(np.max(np.abs(fd2 - d2) / den2))


@dataclass(frozen=True)
class DiffusionMatrix:
    n: int
    matrix: np.ndarray

    def quadratic_form(self, zeta):
        zeta = np.asarray(zeta, dtype=float)
        return float(zeta @ self.matrix @ zeta)

    def min_eigenvalue(self):
        return float(np.linalg.eigvalsh(self.matrix)[0])


def diffusion_matrix(model, eta):
    """A(eta)_{ij} = 2 Phi''(|eta|^2) eta_i eta_j + Phi'(|eta|^2) delta_ij."""
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    if not np.all(np.isfinite(eta)):
        raise ValueError("eta must be finite")
    s = float(eta @ eta)
    d1 = float(model.dphi(s))
    # at eta = 0 the outer product vanishes, and s Phi''(s) -> 0 whenever Phi'(0) is finite
    d2 = float(model.ddphi(s)) if s > 0 else 0.0
    if not (np.isfinite(d1) and np.isfinite(d2)):
        raise SingularGradient(f"Phi' or Phi'' undefined at |eta|^2 = {s:g} for {model.label()}")
    a = 2.0 * d2 * np.outer(eta, eta) + d1 * np.eye(eta.size)
    return DiffusionMatrix(eta.size, 0.5 * (a + a.T))


def diffusion_form(model, grad, zeta):
    """A(grad) zeta . zeta evaluated pointwise; vectors live on axis 0."""
    grad = np.asarray(grad, dtype=float)
    zeta = np.asarray(zeta, dtype=float)
    s = np.sum(grad * grad, axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        d2 = np.where(s > 0, model.ddphi(s), 0.0)
    return 2.0 * d2 * np.sum(zeta * grad, axis=0) ** 2 + model.dphi(s) * np.sum(zeta * zeta, axis=0)


def ratio_bounds(model, s_grid=None):
    """(inf, sup) of 2 s Phi'(s) / Phi(s) over the grid, plus the s -> 0 limit.

    The s -> 0 limit equals 2 whenever Phi'(0) is finite and nonzero; otherwise
    it is left out.
    """
    s = log_grid() if s_grid is None else np.asarray(s_grid, dtype=float)
    if np.any(s <= 0):
        raise ValueError("s_grid must be strictly positive")
    r = 2.0 * s * model.dphi(s) / model.phi(s)
    r = r[np.isfinite(r)]
    d0 = float(model.dphi(np.array(0.0)))
    if np.isfinite(d0) and d0 != 0.0:
        r = np.append(r, 2.0)
    return float(np.min(r)), float(np.max(r))


def alpha_star(model, s_grid=None):
    """Smallest alpha with alpha Phi(s) >= 2 s Phi'(s) for every sampled s.

    This is the threshold at which the rescaled ball energy becomes
    nondecreasing: it equals the supremum of 2 s Phi'/Phi over s > 0 (for the
    Laplacian and p-Laplacian the ratio is constant; for the mean-curvature
    Phi it decreases from 2 at s -> 0 to 1 at infinity). Grid refinement can
    only increase the returned value.
    """
    return ratio_bounds(model, s_grid)[1]


@dataclass
class ConditionReport:
    condition: str
    p: float | None
    epsilon: float
    c1: float
    c2: float
    violated: bool
    sample_count: int
    details: dict


def natural_condition(model):
    if model.kind == MEAN_CURVATURE:
        return "A", None, 1.0
    if model.kind == P_LAPLACIAN:
        return "B", model.p, model.epsilon
    return "B", 2.0, 0.0


def check_conditions_AB(model, sample_count=1000, *, n=2, seed=0, condition=None,
                        p=None, epsilon=None, eta_scale=3.0):
    """Empirical constants for growth conditions (A) or (B) from random samples.

    For (A), zeta' = (zeta, eta . zeta) in R^{n+1}, which is orthogonal to
    (-eta, 1). The returned c1 / c2 are the min / max of the sampled ratios
    over both the Phi' bound and the quadratic-form bound.
    """
    if sample_count < 100:
        raise ValueError("sample_count must be >= 100")
    nat_cond, nat_p, nat_eps = natural_condition(model)
    condition = (condition or nat_cond).upper()
    p = nat_p if p is None else p
    eps = nat_eps if epsilon is None else epsilon
    rng = np.random.default_rng(seed)
    eta = rng.normal(size=(sample_count, n)) * eta_scale * rng.uniform(0, 1, size=(sample_count, 1))
    zeta = rng.normal(size=(sample_count, n))
    s = np.sum(eta**2, axis=1)
    norm = np.sqrt(s)
    form = diffusion_form(model, eta.T, zeta.T)
    if condition == "A":
        weight = (eps + norm) ** -1.0
        zeta_prime_sq = np.sum(zeta**2, axis=1) + np.sum(eta * zeta, axis=1) ** 2
    elif condition == "B":
        with np.errstate(divide="ignore"):
            weight = (eps + norm) ** (p - 2.0)
        zeta_prime_sq = np.sum(zeta**2, axis=1)
    else:
        raise ValueError(f"unknown condition {condition!r}")
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = model.dphi(s) / weight
        r2 = form / (weight * zeta_prime_sq)
    ratios = np.concatenate([r1, r2])
    ratios = ratios[np.isfinite(ratios)]
    violated = bool(ratios.size == 0 or np.any(ratios <= 0.0))
    return ConditionReport(
        condition=condition,
        p=p,
        epsilon=float(eps),
        c1=float(np.min(ratios)) if ratios.size else float("nan"),
        c2=float(np.max(ratios)) if ratios.size else float("nan"),
        violated=violated,
        sample_count=sample_count,
        details={
            "dphi_ratio": (float(np.min(r1)), float(np.max(r1))),
            "form_ratio": (float(np.min(r2)), float(np.max(r2))),
            "eta_max": float(norm.max()),
        },
    )


def dphi_times_s(phi, s):
    """Phi'(s) s with its limit 0 at s = 0 (Phi' is singular there for p < 2)."""
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(s > 0, phi.dphi(s) * s, 0.0)
