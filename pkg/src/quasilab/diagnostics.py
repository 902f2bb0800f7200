"""Functionals of profiles and fields, and the identities they satisfy.

All field diagnostics are restricted to an interior box obtained by removing
``margin`` (default 10%) of the box width on every side; the margin is
recorded in every result.

Ball and sphere integrals use polar product quadrature (Gauss-Legendre in
the radius, equispaced angles in 2D, Gauss-Legendre x equispaced on the
sphere in 3D) applied to cubic-spline interpolants of the nodal values and
gradients.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
from scipy import ndimage
from scipy.integrate import cumulative_trapezoid, trapezoid

from .errors import DomainTooSmall, HypothesisViolated, NotScalar
from .phi_models import MEAN_CURVATURE, P_LAPLACIAN, dphi_times_s
from .report import Check

DEFAULT_MARGIN = 0.1

ANCHORS = {
    "pointwise_deficit": "pointwise gradient bound for bounded scalar solutions",
    "hamiltonian_slices": "Hamiltonian identity on cross-sections",
    "flux_identity": "cross-section flux form of the Hamiltonian identity",
    "monotonicity": "monotonicity of the rescaled ball energy",
    "monotonicity_derivative": "lower bound for the derivative of the rescaled ball energy",
    "pohozaev": "Pohozaev-Rellich identity on balls",
    "energy_upper": "upper energy growth bound",
    "energy_lower": "lower energy bound from monotonicity",
    "first_integral": "conserved first integral of the one-dimensional system",
}


def interior_box(fld, margin=DEFAULT_MARGIN):
    lo = np.asarray(fld.lo) + margin * np.asarray(fld.width)
    hi = np.asarray(fld.hi) - margin * np.asarray(fld.width)
    return lo, hi


def interior_slices(fld, margin=DEFAULT_MARGIN):
    lo, hi = interior_box(fld, margin)
    out = []
    for ax, a, b in zip(fld.axes(), lo, hi):
        tol = 1e-9 * (ax[-1] - ax[0])
        idx = np.nonzero((ax >= a - tol) & (ax <= b + tol))[0]
        out.append(slice(int(idx[0]), int(idx[-1]) + 1))
    return tuple(out)


def interior_mask(fld, margin=DEFAULT_MARGIN):
    mask = np.zeros(fld.shape, dtype=bool)
    mask[interior_slices(fld, margin)] = True
    return mask


def squared_gradients(fld):
    return np.sum(fld.grads**2, axis=1)


def energy_density(fld, phi, nl, shift=0.0):
    """sum_i Phi(|grad u_i|^2) - 2 potential(u) + shift."""
    return np.sum(phi.phi(squared_gradients(fld)), axis=0) - 2.0 * nl.potential(fld.values) + shift


def default_tolerance(fld, scale=1.0):
    h = max(fld.spacing)
    return 50.0 * h * h * scale


# ---------------------------------------------------------------- pointwise


@dataclass
class DeficitResult:
    deficit: np.ndarray
    specialized: np.ndarray | None
    specialized_name: str
    max_interior: float
    max_specialized: float | None
    signs_agree: bool
    margin: float

    def check(self, tol, anchor=ANCHORS["pointwise_deficit"]):
        notes = f"interior margin {self.margin:g}; specialised form: {self.specialized_name}"
        return Check("pointwise_deficit", "scalar", self.max_interior, self.max_interior, tol, anchor, notes)


def deficit_values(grad_sq, values, phi, nl):
    """2 Phi'(s) s - Phi(s) - 2 F(u) with F = -potential."""
    F = -nl.potential(values)
    return 2.0 * dphi_times_s(phi, grad_sq) - phi.phi(grad_sq) - 2.0 * F


def specialized_deficit(grad_sq, values, phi, nl):
    """Family-specific forms of the gradient bound, or (None, 'none').

    Mean curvature: (sqrt(1+s) - 1)/sqrt(1+s) - F (half the generic deficit).
    p-Laplacian with eps = 0: |grad u|^p - p/(p-1) F (the generic deficit
    times p/(2(p-1))).
    """
    F = -nl.potential(values)
    if phi.kind == MEAN_CURVATURE:
        root = np.sqrt(1.0 + grad_sq)
        return (root - 1.0) / root - F, "mean curvature: (sqrt(1+s)-1)/sqrt(1+s) - F"
    if phi.kind == P_LAPLACIAN and phi.epsilon == 0.0:
        p = phi.p
        return grad_sq ** (p / 2.0) - p / (p - 1.0) * F, "p-Laplacian: |grad u|^p - p/(p-1) F"
    return None, "none"


def pointwise_deficit(fld, phi, nl, margin=DEFAULT_MARGIN, exploratory=False, sign_tol=1e-6):
    """Gradient-bound deficit D = 2 Phi' |grad u|^2 - Phi - 2F(u) per node.

    Scalar fields only; ``exploratory=True`` computes the same quantity for
    systems without attaching a verdict (no bound is known there). Signs of the
    generic and specialised forms are compared where |D| exceeds ``sign_tol``.
    """
    if fld.m != 1 and not exploratory:
        raise NotScalar("the pointwise gradient bound is only established for scalar equations")
    s = squared_gradients(fld)
    D = deficit_values(s, fld.values, phi, nl)
    if fld.m != 1:
        D = np.sum(D, axis=0)
    else:
        D = D[0]
    mask = interior_mask(fld, margin)
    spec, spec_name = (None, "none") if fld.m != 1 else specialized_deficit(s[0], fld.values, phi, nl)
    max_spec = None
    agree = True
    if spec is not None:
        spec = np.asarray(spec)
        spec = spec[0] if spec.ndim == D.ndim + 1 else spec
        max_spec = float(np.max(spec[mask]))
        big = np.abs(D[mask]) > sign_tol
        agree = bool(np.all(np.sign(D[mask][big]) == np.sign(spec[mask][big])))
    return DeficitResult(D, spec, spec_name, float(np.max(D[mask])), max_spec, agree, margin)


# ---------------------------------------------------------------- Hamiltonian


def hamiltonian_integrand(values, grads, phi, nl, axis):
    """sum_i [Phi(|grad u_i|^2)/2 - Phi'(|grad u_i|^2) (d_axis u_i)^2] - potential(u).

    ``grads`` has shape (m, n, ...).
    """
    s = np.sum(grads**2, axis=1)
    dn = grads[:, axis]
    return np.sum(0.5 * phi.phi(s) - phi.dphi(s) * dn**2, axis=0) - nl.potential(values)


@dataclass
class SliceFunctional:
    axis: int
    positions: np.ndarray
    gamma: np.ndarray
    area: float
    non_decaying: bool
    slices: tuple
    margin: float
    notes: str = ""

    @property
    def gamma_per_area(self):
        return self.gamma / self.area

    def drift(self):
        g = self.gamma_per_area if self.non_decaying else self.gamma
        return float(np.max(np.abs(g - g[0])))


def _trapz_all(arr, spacings):
    out = arr
    for h in spacings:
        out = trapezoid(out, dx=h, axis=0)
    return out


def hamiltonian_slices(fld, phi, nl, axis, margin=DEFAULT_MARGIN, decay_tol=1e-6):
    """Cross-sectional integrals of the Hamiltonian integrand along ``axis``."""
    if not 0 <= axis < fld.n:
        raise ValueError("axis out of range")
    e = hamiltonian_integrand(fld.values, fld.grads, phi, nl, axis)
    sl = interior_slices(fld, margin)
    e = np.moveaxis(e[sl], axis, -1)
    others = [b for b in range(fld.n) if b != axis]
    hs = [fld.spacing[b] for b in others]
    gamma = _trapz_all(e, hs)
    area = float(np.prod([fld.spacing[b] * (sl[b].stop - sl[b].start - 1) for b in others]))
    scale = float(np.max(np.abs(e))) if e.size else 0.0
    boundary = []
    for k in range(fld.n - 1):
        boundary.append(np.abs(np.take(e, 0, axis=k)))
        boundary.append(np.abs(np.take(e, -1, axis=k)))
    bmax = max(float(np.max(b)) for b in boundary)
    non_decaying = bmax > decay_tol * max(scale, 1e-300) and scale > 0
    notes = ("non-decaying cross-section; constancy of Gamma per unit cross-sectional area"
             if non_decaying else "integrand decays on the cross-section boundary")
    pos = fld.axes()[axis][sl[axis]]
    return SliceFunctional(axis, pos, gamma, area, bool(non_decaying), sl, margin, notes)


def boundary_flux_density(fld, phi, sf):
    """sum_i integral over the cross-section boundary of Phi' d_nu u_i d_axis u_i, per slice."""
    axis, sl = sf.axis, sf.slices
    s = squared_gradients(fld)
    dphi = phi.dphi(s)
    others = [b for b in range(fld.n) if b != axis]
    total = np.zeros(sf.positions.size)
    for k, b in enumerate(others):
        g = np.sum(dphi * fld.grads[:, b] * fld.grads[:, axis], axis=0)[sl]
        g = np.moveaxis(g, axis, -1)
        hi = np.take(g, -1, axis=k)
        lo = np.take(g, 0, axis=k)
        rest = [fld.spacing[c] for c in others if c != b]
        total += _trapz_all(hi - lo, rest)
    return total


def flux_identity_residual(sf, fld, phi):
    """Gamma(x) - Gamma(x_0) - integral_{x_0}^{x} boundary flux, per slice.

    Returns (residual series, scale) where scale is the largest magnitude of
    the terms being compared.
    """
    dens = boundary_flux_density(fld, phi, sf)
    cum = cumulative_trapezoid(dens, sf.positions, initial=0.0)
    dg = sf.gamma - sf.gamma[0]
    res = dg - cum
    scale = max(float(np.max(np.abs(dg))), float(np.max(np.abs(cum))), float(np.max(np.abs(sf.gamma))))
    return res, scale


# ---------------------------------------------------------------- ball quadrature


class BallQuadrature:
    """Polar quadrature on balls and spheres around ``center`` inside a field."""

    def __init__(self, fld, center=None, margin=DEFAULT_MARGIN, density=2.0, order=3):
        self.fld = fld
        self.center = np.asarray(center if center is not None else
                                 [(a + b) / 2 for a, b in zip(fld.lo, fld.hi)], dtype=float)
        self.margin = margin
        self.density = density
        self.order = order
        self.h = min(fld.spacing)
        arrays = [fld.values[i] for i in range(fld.m)]
        arrays += [fld.grads[i, a] for i in range(fld.m) for a in range(fld.n)]
        self._coef = [ndimage.spline_filter(a, order=order) if order > 1 else a for a in arrays]
        self.lo_in, self.hi_in = interior_box(fld, margin)

    def max_radius(self):
        return float(min(np.min(self.center - self.lo_in), np.min(self.hi_in - self.center)))

    def _check(self, r):
        if r > self.max_radius() + 1e-12:
            raise DomainTooSmall(f"ball of radius {r:g} leaves the interior region")

    def _eval(self, pts):
        idx = (pts - np.asarray(self.fld.lo)[:, None]) / np.asarray(self.fld.spacing)[:, None]
        out = [ndimage.map_coordinates(c, idx, order=self.order, prefilter=False, mode="nearest") for c in self._coef]
        m, n = self.fld.m, self.fld.n
        vals = np.stack(out[:m])
        grads = np.stack(out[m:]).reshape(m, n, -1)
        return vals, grads

    def _angles(self, r):
        n = self.fld.n
        if n == 2:
            k = max(64, int(math.ceil(2 * math.pi * r * self.density / self.h)))
            th = 2 * math.pi * np.arange(k) / k
            return np.stack([np.cos(th), np.sin(th)]), np.full(k, 2 * math.pi / k)
        kp = max(16, int(math.ceil(math.pi * r * self.density / (2 * self.h))))
        mu, wmu = np.polynomial.legendre.leggauss(kp)
        ka = 2 * kp
        ph = 2 * math.pi * np.arange(ka) / ka
        st = np.sqrt(1 - mu**2)
        dirs = np.stack([np.outer(st, np.cos(ph)), np.outer(st, np.sin(ph)), np.outer(mu, np.ones(ka))]).reshape(3, -1)
        w = np.outer(wmu, np.full(ka, 2 * math.pi / ka)).ravel()
        return dirs, w

    def sphere(self, integrand, r):
        """Integral over the sphere of radius r of integrand(values, grads, normals)."""
        self._check(r)
        if r == 0:
            return 0.0
        dirs, w = self._angles(r)
        pts = self.center[:, None] + r * dirs
        vals, grads = self._eval(pts)
        f = integrand(vals, grads, dirs)
        return float(np.sum(f * w) * r ** (self.fld.n - 1))

    def ball(self, integrand, r):
        """Integral over the ball of radius r of integrand(values, grads, normals)."""
        self._check(r)
        if r == 0:
            return 0.0
        nr = max(16, int(math.ceil(r * self.density / self.h)))
        x, wr = np.polynomial.legendre.leggauss(nr)
        rho = 0.5 * r * (x + 1)
        wr = 0.5 * r * wr
        dirs, wa = self._angles(r)
        pts = self.center[:, None, None] + rho[None, :, None] * dirs[:, None, :]
        pts = pts.reshape(self.fld.n, -1)
        vals, grads = self._eval(pts)
        normals = np.broadcast_to(dirs[:, None, :], (self.fld.n, nr, dirs.shape[1])).reshape(self.fld.n, -1)
        f = integrand(vals, grads, normals).reshape(nr, -1)
        weights = (wr * rho ** (self.fld.n - 1))[:, None] * wa[None, :]
        return float(np.sum(f * weights))


def _integrands(phi, nl):
    def energy(v, g, _):
        return np.sum(phi.phi(np.sum(g**2, axis=1)), axis=0) - 2.0 * nl.potential(v)

    def phi_sum(v, g, _):
        return np.sum(phi.phi(np.sum(g**2, axis=1)), axis=0)

    def dphi_s(v, g, _):
        s = np.sum(g**2, axis=1)
        return np.sum(dphi_times_s(phi, s), axis=0)

    def radial_dphi(v, g, nrm):
        s = np.sum(g**2, axis=1)
        dr = np.einsum("ma...,a...->m...", g, nrm)
        return np.sum(phi.dphi(s) * dr**2, axis=0)

    def pot(v, g, _):
        return nl.potential(v)

    return {"energy": energy, "phi": phi_sum, "dphi_s": dphi_s, "radial": radial_dphi, "potential": pot}


# ---------------------------------------------------------------- monotonicity


@dataclass
class MonotonicityResult:
    alpha: float
    radii: np.ndarray
    I: np.ndarray
    dI: np.ndarray
    bound: np.ndarray
    monotone_violation: float
    derivative_violation: float
    tolerance: float
    derivative_tolerance: float
    margin: float
    max_potential: float

    @property
    def monotone(self):
        return self.monotone_violation <= self.tolerance

    @property
    def derivative_ok(self):
        return self.derivative_violation <= self.derivative_tolerance

    def checks(self, required=True):
        return [
            Check("monotonicity", "series", self.I, self.monotone_violation, self.tolerance,
                  ANCHORS["monotonicity"], f"alpha={self.alpha:g}; interior margin {self.margin:g}", required),
            Check("monotonicity_derivative", "series", self.dI - self.bound, self.derivative_violation,
                  self.derivative_tolerance, ANCHORS["monotonicity_derivative"],
                  "finite-difference derivative minus boundary lower bound", required),
        ]


def check_nonpositive_potential(fld, nl, margin=DEFAULT_MARGIN, tol=1e-12):
    pot = nl.potential(fld.values)[interior_mask(fld, margin)]
    top = float(np.max(pot))
    if top > tol:
        raise HypothesisViolated(f"potential reaches {top:.3e} > 0 on the field")
    return top


def rescaled_energy(quad, phi, nl, alpha, r):
    """I_alpha(r) = r^(alpha - n) * ball integral of sum Phi - 2 potential."""
    n = quad.fld.n
    return r ** (alpha - n) * quad.ball(_integrands(phi, nl)["energy"], r)


def monotonicity_I(fld, phi, nl, alpha, radii, center=None, margin=DEFAULT_MARGIN, tol=None, rel_step=1e-3):
    """Rescaled ball energy at each radius with monotonicity and derivative checks.

    The derivative check compares a central difference of I_alpha (step
    ``rel_step * r``) with
        2 r^(alpha-n) sphere(sum Phi' (d_r u)^2) - 2 alpha r^(alpha-n-1) ball(potential).
    """
    radii = np.asarray(radii, dtype=float)
    if np.any(np.diff(radii) <= 0):
        raise ValueError("radii must be increasing")
    top = check_nonpositive_potential(fld, nl, margin) if fld.m >= 2 else float(np.max(nl.potential(fld.values)))
    quad = BallQuadrature(fld, center, margin)
    ig = _integrands(phi, nl)
    n = fld.n
    I, dI, bound = [], [], []
    for r in radii:
        I.append(rescaled_energy(quad, phi, nl, alpha, r))
        d = rel_step * r
        dI.append((rescaled_energy(quad, phi, nl, alpha, r + d) - rescaled_energy(quad, phi, nl, alpha, r - d)) / (2 * d))
        bound.append(2 * r ** (alpha - n) * quad.sphere(ig["radial"], r)
                     - 2 * alpha * r ** (alpha - n - 1) * quad.ball(ig["potential"], r))
    I, dI, bound = map(np.asarray, (I, dI, bound))
    scale = max(float(np.max(np.abs(I))), 1e-300)
    dscale = max(float(np.max(np.abs(dI))), float(np.max(np.abs(bound))), 1e-300)
    h = max(fld.spacing)
    tol = 1e-8 * scale + 10 * h * h if tol is None else tol
    dtol = 1e-8 * dscale + 10 * h * h
    mono_v = float(np.max(I[:-1] - I[1:])) if I.size > 1 else -np.inf
    deriv_v = float(np.max(bound - dI))
    return MonotonicityResult(alpha, radii, I, dI, bound, mono_v, deriv_v, tol, dtol, margin, top)


# ---------------------------------------------------------------- Pohozaev


@dataclass
class PohozaevResult:
    radius: float
    lhs: float
    rhs: float
    terms: dict
    normalized: float

    def check(self, tol, required=True):
        return Check("pohozaev", "scalar", self.normalized, self.normalized, tol, ANCHORS["pohozaev"],
                     f"r={self.radius:g}; residual normalised by the largest term", required)


def pohozaev_terms(quad, phi, nl, r):
    ig = _integrands(phi, nl)
    n = quad.fld.n
    terms = {
        "ball_phi": -n * quad.ball(ig["phi"], r),
        "sphere_radial": 2 * r * quad.sphere(ig["radial"], r),
        "sphere_phi": -r * quad.sphere(ig["phi"], r),
        "ball_dphi_s": -2 * quad.ball(ig["dphi_s"], r),
        "sphere_potential": 2 * r * quad.sphere(ig["potential"], r),
        "ball_potential": -2 * n * quad.ball(ig["potential"], r),
    }
    return terms


def pohozaev_residual(fld, phi, nl, r, center=None, margin=DEFAULT_MARGIN):
    """-n ball(sum Phi) against the sphere and ball terms of the rescaling identity.

    rhs = 2r sphere(sum Phi' (d_r u)^2) - r sphere(sum Phi) - 2 ball(sum Phi' |grad u|^2)
          + 2r sphere(potential) - 2n ball(potential)
    """
    quad = BallQuadrature(fld, center, margin)
    terms = pohozaev_terms(quad, phi, nl, r)
    lhs = terms["ball_phi"]
    rhs = sum(v for k, v in terms.items() if k != "ball_phi")
    big = max(abs(v) for v in terms.values())
    normalized = 0.0 if big == 0 else abs(lhs - rhs) / big
    return PohozaevResult(float(r), lhs, rhs, terms, normalized)


# ---------------------------------------------------------------- energy growth


def loglog_slope(x, y):
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    A = np.vstack([np.log(x), np.ones_like(x)]).T
    coef, *_ = np.linalg.lstsq(A, np.log(y), rcond=None)
    return float(coef[0]), float(np.exp(coef[1]))


def far_field_limit(fld, margin=DEFAULT_MARGIN):
    """Average value on the interior end slice where the gradient is smallest."""
    sl = interior_slices(fld, margin)
    vals = fld.values[(slice(None),) + sl]
    gsq = np.sum(squared_gradients(fld)[(slice(None),) + sl], axis=0)
    best, best_g = None, np.inf
    for a in range(fld.n):
        for end in (0, -1):
            g = float(np.mean(np.take(gsq, end, axis=a)))
            if g < best_g:
                best_g = g
                best = np.mean(np.take(vals, end, axis=a + 1).reshape(fld.m, -1), axis=1)
    return best


@dataclass
class EnergyBounds:
    radii: np.ndarray
    J: np.ndarray
    E: np.ndarray
    beta: float
    limit: np.ndarray
    lower_ratio: float | None
    alpha: float | None
    dimension: int = 2

    def upper_check(self, slack=0.1, required=True):
        n_minus_1 = self.dimension - 1
        return Check("energy_upper", "scalar", self.beta, self.beta - n_minus_1, slack, ANCHORS["energy_upper"],
                     f"fitted exponent vs n-1={n_minus_1}", required)


def energy_bounds(fld, phi, nl, radii, center=None, limit=None, alpha=None, margin=DEFAULT_MARGIN):
    """J_R = ball(sum Phi - 2 potential + 2 potential(a)) and its log-log growth exponent.

    With ``alpha`` the lower bound E_R >= I_alpha(1) R^(n - alpha) is also
    evaluated (E_R without the constant shift) and reported as the smallest
    ratio over R >= 1.
    """
    radii = np.asarray(radii, dtype=float)
    a = far_field_limit(fld, margin) if limit is None else np.asarray(limit, dtype=float)
    shift = 2.0 * float(nl.potential(a.reshape(fld.m, 1))[0])
    quad = BallQuadrature(fld, center, margin)
    energy = _integrands(phi, nl)["energy"]
    n = fld.n
    E = np.array([quad.ball(energy, r) for r in radii])
    vol = np.array([math.pi ** (n / 2) / math.gamma(n / 2 + 1) * r**n for r in radii])
    J = E + shift * vol
    pos = J > 0
    beta = loglog_slope(radii[pos], J[pos])[0] if np.count_nonzero(pos) >= 2 else float("nan")
    lower = None
    if alpha is not None:
        i1 = rescaled_energy(quad, phi, nl, alpha, 1.0)
        sel = radii >= 1.0
        if i1 > 0 and np.any(sel):
            lower = float(np.min(E[sel] / (i1 * radii[sel] ** (n - alpha))))
    return EnergyBounds(radii, J, E, beta, a, lower, alpha, dimension=n)


def ball_growth(fld, density, radii, center=None, margin=DEFAULT_MARGIN):
    """Fitted exponent of R -> ball integral of density(values, grads, normals)."""
    quad = BallQuadrature(fld, center, margin)
    vals = np.array([quad.ball(density, r) for r in radii])
    return loglog_slope(radii, vals)[0], vals
