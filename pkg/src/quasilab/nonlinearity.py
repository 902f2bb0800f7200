"""Right-hand sides H(u) of the system, with Jacobians and potentials.

Arrays follow one convention throughout: a state ``u`` has shape ``(m, ...)``
with any trailing grid shape, ``H(u)`` has the same shape, and the Jacobian
``J`` has shape ``(m, m, ...)`` with ``J[i, j] = d H_i / d u_j``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import MissingAntiderivative


@dataclass(frozen=True)
class Nonlinearity:
    name: str
    m: int
    h: Callable = field(repr=False)
    jac: Callable = field(repr=False)
    potential_fn: Callable | None = field(default=None, repr=False)
    shift: float = 0.0
    params: dict = field(default_factory=dict)

    def H(self, u):
        u = np.asarray(u, dtype=float)
        return np.asarray(self.h(u), dtype=float)

    def jacobian(self, u):
        u = np.asarray(u, dtype=float)
        return np.asarray(self.jac(u), dtype=float)

    @property
    def has_potential(self):
        return self.potential_fn is not None

    def potential(self, u):
        """Normalised antiderivative: grad potential = H, and ``shift`` already subtracted."""
        if self.potential_fn is None:
            raise MissingAntiderivative(f"nonlinearity {self.name!r} has no antiderivative")
        u = np.asarray(u, dtype=float)
        return np.asarray(self.potential_fn(u), dtype=float) - self.shift

    def describe(self):
        return {"name": self.name, "m": self.m, "shift": self.shift, **self.params}


def _stack(*arrays):
    return np.stack(np.broadcast_arrays(*arrays))


def allen_cahn():
    """H(u) = u - u^3 with potential -(1 - u^2)^2 / 4."""
    return Nonlinearity(
        name="allen_cahn",
        m=1,
        h=lambda u: u - u**3,
        jac=lambda u: (1.0 - 3.0 * u**2)[None],
        potential_fn=lambda u: -0.25 * (1.0 - u[0] ** 2) ** 2,
    )


def ginzburg_landau(m=2):
    """H_i(u) = u_i (1 - |u|^2) with potential -(1 - |u|^2)^2 / 4."""
    if m < 1:
        raise ValueError("m must be >= 1")

    def h(u):
        return u * (1.0 - np.sum(u**2, axis=0))

    def jac(u):
        r = 1.0 - np.sum(u**2, axis=0)
        out = -2.0 * u[:, None] * u[None, :]
        for i in range(u.shape[0]):
            out[i, i] += r
        return out

    return Nonlinearity(
        name="ginzburg_landau",
        m=m,
        h=h,
        jac=jac,
        potential_fn=lambda u: -0.25 * (1.0 - np.sum(u**2, axis=0)) ** 2,
        params={"m": m},
    )


def bose_einstein(beta=1.0):
    """Two-component coupling H = (-beta u1 u2^2, -beta u1^2 u2), potential -beta u1^2 u2^2 / 2."""
    if beta <= 0:
        raise ValueError("beta must be positive")

    def jac(u):
        u1, u2 = u
        return _stack(
            _stack(-beta * u2**2, -2 * beta * u1 * u2),
            _stack(-2 * beta * u1 * u2, -beta * u1**2),
        )

    return Nonlinearity(
        name="bose_einstein",
        m=2,
        h=lambda u: _stack(-beta * u[0] * u[1] ** 2, -beta * u[0] ** 2 * u[1]),
        jac=jac,
        potential_fn=lambda u: -0.5 * beta * u[0] ** 2 * u[1] ** 2,
        params={"beta": beta},
    )


def coupled_pair(kappa=0.5):
    """Two Allen-Cahn components with bilinear coupling of tunable sign.

    Potential -(1-u1^2)^2/4 - (1-u2^2)^2/4 + kappa u1 u2, shifted so that its
    supremum |kappa| + kappa^2/2 (attained at u1 = sign(kappa) u2 with
    u1^2 = 1 + |kappa|) becomes zero. The cross derivatives equal kappa.

    The field u1 = A tanh(A t / sqrt 2), u2 = sign(kappa) u1 with
    A = sqrt(1 + |kappa|) solves the one-dimensional system exactly.
    """
    k = float(kappa)

    def h(u):
        return _stack(u[0] - u[0] ** 3 + k * u[1], u[1] - u[1] ** 3 + k * u[0])

    def jac(u):
        kk = np.full_like(u[0], k)
        return _stack(_stack(1 - 3 * u[0] ** 2, kk), _stack(kk, 1 - 3 * u[1] ** 2))

    def pot(u):
        return -0.25 * (1 - u[0] ** 2) ** 2 - 0.25 * (1 - u[1] ** 2) ** 2 + k * u[0] * u[1]

    return Nonlinearity(
        name="coupled_pair",
        m=2,
        h=h,
        jac=jac,
        potential_fn=pot,
        shift=abs(k) + 0.5 * k * k,
        params={"kappa": k},
    )


def coupled_pair_amplitude(kappa):
    """Far-field value of the exact coupled-pair kink, sqrt(1 + |kappa|)."""
    return float(np.sqrt(1.0 + abs(kappa)))


def constant_source(c=1.0, m=1):
    """H_i = c for every component; potential c * sum(u) (unbounded, no shift)."""
    return Nonlinearity(
        name="constant_source",
        m=m,
        h=lambda u: np.full_like(u, c),
        jac=lambda u: np.zeros((u.shape[0],) + u.shape),
        potential_fn=lambda u: c * np.sum(u, axis=0),
        params={"c": c},
    )


def zero(m=1):
    return Nonlinearity(
        name="zero",
        m=m,
        h=lambda u: np.zeros_like(u),
        jac=lambda u: np.zeros((u.shape[0],) + u.shape),
        potential_fn=lambda u: np.zeros_like(u[0]),
        params={"m": m},
    )


def custom(name, m, h, jac, potential=None, shift=0.0):
    return Nonlinearity(name=name, m=m, h=h, jac=jac, potential_fn=potential, shift=shift)


_CATALOG = {
    "allen_cahn": allen_cahn,
    "ginzburg_landau": ginzburg_landau,
    "bose_einstein": bose_einstein,
    "coupled_pair": coupled_pair,
    "constant_source": constant_source,
    "zero": zero,
}


def builtin_nonlinearities():
    """Name -> factory for the bundled nonlinearities."""
    return dict(_CATALOG)


def make_nonlinearity(name, **params):
    try:
        factory = _CATALOG[name]
    except KeyError:
        raise ValueError(f"unknown nonlinearity {name!r}") from None
    return factory(**params)


def random_states(m, count, lo=-2.0, hi=2.0, seed=0):
    """Uniform samples in [lo, hi]^m, shaped (m, count)."""
    rng = np.random.default_rng(seed)
    return rng.uniform(lo, hi, size=(m, count))


def potential_gradient_error(nl, points, step=1e-5):
    """Max relative error between central differences of the potential and H."""
    points = np.asarray(points, dtype=float)
    exact = nl.H(points)
    fd = np.empty_like(exact)
    for i in range(nl.m):
        e = np.zeros((nl.m,) + (1,) * (points.ndim - 1))
        e[i] = step
        fd[i] = (nl.potential(points + e) - nl.potential(points - e)) / (2 * step)
    scale = max(1.0, float(np.max(np.abs(exact))))
    return float(np.max(np.abs(fd - exact)) / scale)


def jacobian_error(nl, points, step=1e-5):
    """Max relative error between central differences of H and the Jacobian."""
    points = np.asarray(points, dtype=float)
    exact = nl.jacobian(points)
    fd = np.empty_like(exact)
    for j in range(nl.m):
        e = np.zeros((nl.m,) + (1,) * (points.ndim - 1))
        e[j] = step
        fd[:, j] = (nl.H(points + e) - nl.H(points - e)) / (2 * step)
    scale = max(1.0, float(np.max(np.abs(exact))))
    return float(np.max(np.abs(fd - exact)) / scale)


def is_symmetric(nl, u_samples, tol=1e-12):
    """(symmetric?, max |d_i H_j - d_j H_i|) over samples of shape (m, k)."""
    u = np.asarray(u_samples, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if u.shape[-1] < 1:
        raise ValueError("need at least one sample")
    jac = nl.jacobian(u)
    asym = float(np.max(np.abs(jac - np.swapaxes(jac, 0, 1)))) if nl.m > 1 else 0.0
    return asym <= tol, asym


@dataclass(frozen=True)
class SignPattern:
    """Per-component monotonicity directions (+1 / -1)."""

    directions: tuple

    def __post_init__(self):
        if any(d not in (1, -1) for d in self.directions):
            raise ValueError("directions must be +1 or -1")


@dataclass
class OrientabilityReport:
    orientable: bool | None
    indeterminate_pairs: list
    violating_pairs: list
    coupling_signs: np.ndarray


def coupling_signs(nl, u_samples, zero_tol=1e-14):
    """Sign matrix of d_j H_i over samples; entries are nan where the sign changes.

    Entries that vanish at every sample are reported as 0.
    """
    jac = nl.jacobian(np.asarray(u_samples, dtype=float))
    jac = jac.reshape(nl.m, nl.m, -1)
    pos = np.any(jac > zero_tol, axis=-1)
    neg = np.any(jac < -zero_tol, axis=-1)
    out = np.zeros((nl.m, nl.m))
    out[pos & ~neg] = 1.0
    out[neg & ~pos] = -1.0
    out[pos & neg] = np.nan
    return out


def box_samples(box, count=4096, seed=0):
    """Samples in a product box given as [(lo, hi), ...], corners included."""
    box = np.asarray(box, dtype=float)
    m = box.shape[0]
    rng = np.random.default_rng(seed)
    pts = box[:, 0:1] + (box[:, 1:2] - box[:, 0:1]) * rng.uniform(size=(m, count))
    corners = np.array(np.meshgrid(*box, indexing="ij")).reshape(m, -1)
    return np.concatenate([pts, corners], axis=1)


def is_orientable(nl, box, pattern, count=4096, seed=0):
    """Check eps_i eps_j sign(d_j H_i) = +1 for every coupled pair on a u-box.

    Pairs whose coupling sign changes inside the box are listed as
    indeterminate and make the verdict ``None``.
    """
    if len(pattern.directions) != nl.m:
        raise ValueError("pattern length must equal m")
    signs = coupling_signs(nl, box_samples(box, count, seed))
    eps = np.asarray(pattern.directions, dtype=float)
    indeterminate, violating = [], []
    for i in range(nl.m):
        for j in range(nl.m):
            if i == j:
                continue
            sgn = signs[i, j]
            if np.isnan(sgn):
                indeterminate.append((i, j))
            elif sgn != 0 and eps[i] * eps[j] * sgn < 0:
                violating.append((i, j))
    verdict = None if indeterminate else not violating
    return OrientabilityReport(verdict, indeterminate, violating, signs)


def coupling_products(nl, u):
    """d_j H_i * d_i H_j, shape (m, m, ...)."""
    jac = nl.jacobian(u)
    return jac * np.swapaxes(jac, 0, 1)


def coupling_matrix(nl, u):
    """c_ij = sqrt(d_j H_i d_i H_j) off the diagonal and c_ii = d_i H_i.

    The diagonal keeps its sign: the stability form is built from the full
    linearisation, whose diagonal entries are d_i H_i themselves.
    """
    jac = nl.jacobian(u)
    prod = jac * np.swapaxes(jac, 0, 1)
    out = np.sqrt(np.clip(prod, 0.0, None))
    for i in range(nl.m):
        out[i, i] = jac[i, i]
    return out
