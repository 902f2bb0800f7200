"""Stability machinery: certificates, quadratic forms, Poincare-type gaps,
sigma quotients, gradient angles and the radial stability inequality.

The quadratic form used throughout is

    Q(zeta) = sum_i int A(grad u_i) grad zeta_i . grad zeta_i - sum_ij int c_ij zeta_i zeta_j

with c_ii = d_i H_i (signed) and c_ij = sqrt(d_j H_i d_i H_j) for i != j.
"""
from __future__ import annotations

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.integrate import quad
from scipy.interpolate import CubicSpline

from .diagnostics import DEFAULT_MARGIN, interior_mask, interior_slices
from .errors import (
    CouplingSignIndeterminate,
    DegenerateDerivative,
    GradientFloorViolation,
    LinearAlgebraFailure,
    NegativeCouplingProduct,
    NotMonotone,
)
from .grid_solver import GridField, _BoxOperator, save_field
from .nonlinearity import coupling_matrix, coupling_products
from .phi_models import P_LAPLACIAN, diffusion_form
from .profile_solver import Profile1D, RadialSolution, _RadialSystem
from .stencils import staggered_first_derivative

FLOOR_FACTOR = 1e-8
DENSE_LIMIT = 2500


def gradient_scale(fld):
    return float(np.max(np.sqrt(np.sum(fld.grads**2, axis=1))))


def default_floor(fld):
    return FLOOR_FACTOR * max(gradient_scale(fld), 1e-300)


def _fd_grad(arr, spacing):
    g = np.gradient(arr, *spacing, edge_order=2)
    return np.stack(g if isinstance(g, (list, tuple)) else [g])


def _divergence(vec, spacing):
    return sum(np.gradient(vec[a], spacing[a], axis=a, edge_order=2) for a in range(vec.shape[0]))


def _safe_ddphi(phi, s):
    """Phi''(s) with the s = 0 value replaced by 0 (it only ever multiplies |grad u|^2 terms)."""
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(s > 0, phi.ddphi(s), 0.0)


def _apply_A(phi, grad, vec):
    """A(grad) vec pointwise; vectors on axis 0."""
    s = np.sum(grad * grad, axis=0)
    return 2.0 * _safe_ddphi(phi, s) * np.sum(grad * vec, axis=0) * grad + phi.dphi(s) * vec


# ---------------------------------------------------------------- certificates


@dataclass
class StabilityCertificate:
    axis: int
    phi_values: np.ndarray
    signs: tuple
    residual: np.ndarray
    residual_norm: float
    coupling_margin: float
    floor: float
    excluded: int
    source: str = "derivative along axis"


def _signs_above_floor(values, mask, floor):
    signs = []
    excluded = 0
    for i, v in enumerate(values):
        sel = mask & (np.abs(v) >= floor)
        excluded += int(np.count_nonzero(mask & ~sel))
        if not np.any(sel):
            raise NotMonotone(f"component {i} has no derivative above the floor {floor:.3e}")
        pos, neg = np.any(v[sel] > 0), np.any(v[sel] < 0)
        if pos and neg:
            raise NotMonotone(f"component {i} changes sign along the axis")
        signs.append(1 if pos else -1)
    return tuple(signs), excluded


def monotone_certificate(fld, phi, nl, axis, floor=None, margin=DEFAULT_MARGIN):
    """Certificate phi_i = d_axis u_i with the residual of the linearised system.

    The residual -div(A(grad u_i) grad phi_i) - sum_j d_j H_i phi_j uses
    central differences of phi and of the flux; it is reported on the
    interior box.
    """
    floor = default_floor(fld) if floor is None else floor
    mask = interior_mask(fld, margin)
    phis = fld.grads[:, axis]
    signs, excluded = _signs_above_floor(phis, mask, floor)
    jac = nl.jacobian(fld.values)
    res = np.empty_like(phis)
    for i in range(fld.m):
        gphi = _fd_grad(phis[i], fld.spacing)
        flux = _apply_A(phi, fld.grads[i], gphi)
        res[i] = -_divergence(flux, fld.spacing) - np.sum(jac[i] * phis, axis=0)
    res[:, ~mask] = 0.0
    margin_val = np.inf
    for i in range(fld.m):
        for j in range(fld.m):
            if i != j:
                margin_val = min(margin_val, float(np.min((jac[i, j] * phis[i] * phis[j])[mask])))
    return StabilityCertificate(axis, phis, signs, res, float(np.max(np.abs(res))), margin_val, floor, excluded)


# ---------------------------------------------------------------- test tuples


@dataclass
class TestTuple:
    """Test functions zeta_i with analytic gradients on the field grid."""

    __test__ = False

    values: np.ndarray
    grads: np.ndarray
    kind: str = "bump"


def _bump_fn(x, center, radius):
    z = (x - center.reshape((-1,) + (1,) * (x.ndim - 1))) / radius
    z2 = np.sum(z * z, axis=0)
    val = np.zeros_like(z2)
    inside = z2 < 1.0
    val[inside] = np.exp(1.0 - 1.0 / (1.0 - z2[inside]))
    dval = np.zeros_like(z2)
    dval[inside] = -val[inside] / (1.0 - z2[inside]) ** 2
    return val, dval[None] * 2.0 * z / radius


def random_test_tuples(fld, count=50, seed=0, margin=DEFAULT_MARGIN, kinds=("bump", "spike", "gradient")):
    """Compactly supported test tuples inside the interior box.

    ``bump``: smooth bumps of radius 10-40% of the interior width;
    ``spike``: bumps of radius three grid spacings;
    ``gradient``: zeta_i = |grad u_i| eta with a smooth bump eta.
    """
    rng = np.random.default_rng(seed)
    x = fld.coords()
    lo = np.asarray(fld.lo) + margin * np.asarray(fld.width)
    hi = np.asarray(fld.hi) - margin * np.asarray(fld.width)
    width = float(np.min(hi - lo))
    h = max(fld.spacing)
    norms = np.sqrt(np.sum(fld.grads**2, axis=1))
    norm_grads = None
    out = []
    for k in range(count):
        kind = kinds[k % len(kinds)]
        vals = np.zeros((fld.m,) + fld.shape)
        grads = np.zeros((fld.m, fld.n) + fld.shape)
        for i in range(fld.m):
            if kind == "spike":
                radius = 3.0 * h
            else:
                radius = width * rng.uniform(0.1, 0.4)
            center = rng.uniform(lo + radius, hi - radius)
            amp = rng.uniform(-1.0, 1.0)
            b, db = _bump_fn(x, center, radius)
            if kind == "gradient":
                if norm_grads is None:
                    norm_grads = np.stack([_fd_grad(nv, fld.spacing) for nv in norms])
                vals[i] = amp * norms[i] * b
                grads[i] = amp * (norm_grads[i] * b + norms[i] * db)
            else:
                vals[i] = amp * b
                grads[i] = amp * db
        out.append(TestTuple(vals, grads, kind))
    return out


# ---------------------------------------------------------------- quadratic form


@dataclass
class QuadraticGap:
    gaps: np.ndarray
    lhs: np.ndarray
    rhs: np.ndarray
    kinds: list

    def min_relative(self):
        scale = np.maximum(np.abs(self.lhs), np.abs(self.rhs))
        scale = np.where(scale == 0, 1.0, scale)
        return float(np.min(self.gaps / scale)) if self.gaps.size else 0.0


def _require_nonnegative_products(nl, values, tol=1e-12):
    prod = coupling_products(nl, values)
    low = float(np.min(prod))
    if low < -tol:
        raise NegativeCouplingProduct(f"d_j H_i d_i H_j reaches {low:.3e} on the field")


def stability_quadratic_gap(fld, phi, nl, tests, cert=None):
    """RHS - LHS of the stability inequality for each test tuple.

    RHS = sum_i int A(grad u_i) grad zeta_i . grad zeta_i and
    LHS = sum_ij int c_ij zeta_i zeta_j, by nodal quadrature.
    """
    _require_nonnegative_products(nl, fld.values)
    c = coupling_matrix(nl, fld.values)
    vol = fld.cell_volume()
    gaps, lhs_l, rhs_l, kinds = [], [], [], []
    for t in tests:
        rhs = sum(float(np.sum(diffusion_form(phi, fld.grads[i], t.grads[i]))) for i in range(fld.m)) * vol
        lhs = float(np.sum(c * t.values[:, None] * t.values[None, :])) * vol
        gaps.append(rhs - lhs)
        lhs_l.append(lhs)
        rhs_l.append(rhs)
        kinds.append(t.kind)
    return QuadraticGap(np.array(gaps), np.array(lhs_l), np.array(rhs_l), kinds)


# ---------------------------------------------------------------- eigenvalues


@dataclass
class EigenResult:
    value: float
    vector: np.ndarray
    values: np.ndarray
    shift: float


def _coupling_blocks(nl, values):
    """Sparse block matrix of c_ij at the given nodes, shape (m*k, m*k)."""
    c = coupling_matrix(nl, values)
    m = c.shape[0]
    return sp.bmat([[sp.diags(c[i, j]) for j in range(m)] for i in range(m)], format="csr"), c


def _smallest(K, c, k=3):
    # K >= -max_node lambda_max(c): shift strictly below the spectrum
    cn = np.moveaxis(c.reshape(c.shape[0], c.shape[1], -1), -1, 0)
    cn = 0.5 * (cn + np.swapaxes(cn, 1, 2))
    top = float(np.max(np.linalg.eigvalsh(cn)[:, -1])) if cn.size else 0.0
    shift = -max(top, 0.0) - 1.0
    size = K.shape[0]
    try:
        if size <= DENSE_LIMIT:
            vals, vecs = np.linalg.eigh(K.toarray())
            return vals[0], vecs[:, 0], vals[:k], shift
        # fixed start vector: ARPACK otherwise draws a random one
        v0 = np.random.default_rng(0).standard_normal(size)
        vals, vecs = spla.eigsh(sp.csc_matrix(K), k=min(k, size - 2), sigma=shift, which="LM", v0=v0)
    except spla.ArpackNoConvergence as exc:
        if len(exc.eigenvalues) == 0:
            raise LinearAlgebraFailure(str(exc)) from exc
        vals, vecs = exc.eigenvalues, exc.eigenvectors
    except (np.linalg.LinAlgError, RuntimeError, ValueError) as exc:
        raise LinearAlgebraFailure(str(exc)) from exc
    order = np.argsort(vals)
    return float(vals[order[0]]), vecs[:, order[0]], vals[order], shift


def _profile_form(prof, nl, phi):
    N = prof.num_intervals
    D = staggered_first_derivative(N, prof.spacing, prof.order)
    Di = D[:, 1:-1]
    interior = prof.u[:, 1:-1]
    blocks = []
    for i in range(prof.m):
        g = D @ prof.u[i]
        blocks.append(Di.T @ sp.diags(phi.flux_slope(g * g)) @ Di)
    stiff = sp.block_diag(blocks, format="csr")
    C, c = _coupling_blocks(nl, interior)
    return stiff - C, c


def _box_form(fld, nl, phi):
    op = _BoxOperator(fld.shape, fld.spacing)
    ii = op.interior_idx
    blocks = []
    for i in range(fld.m):
        u = fld.values[i].ravel()
        acc = None
        for comps, _ in op.faces:
            g = [cm @ u for cm in comps]
            s = sum(gb * gb for gb in g)
            d1 = phi.dphi(s)
            d2 = _safe_ddphi(phi, s)
            for b in range(fld.n):
                for cidx in range(fld.n):
                    coef = 2.0 * d2 * g[b] * g[cidx] + (d1 if b == cidx else 0.0)
                    term = comps[b].T @ sp.diags(coef) @ comps[cidx]
                    acc = term if acc is None else acc + term
        # each face orientation tiles the box once: average the n estimates
        blocks.append((acc / fld.n)[ii][:, ii])
    stiff = sp.block_diag(blocks, format="csr")
    values = fld.values.reshape(fld.m, -1)[:, ii]
    C, c = _coupling_blocks(nl, values)
    return stiff - C, c


def _radial_form(rad, nl):
    prof = rad.profile
    system = _RadialSystem(prof.phi, nl, prof.t, rad.n, [b for _, b in prof.bc])
    g = np.stack([system.diff @ ui for ui in prof.u])
    s = g * g
    vol = system.volume[:-1]
    blocks = []
    for i in range(prof.m):
        slope = prof.phi.flux_slope(s[i])
        stiff = system.h * (system.diff.T @ sp.diags(system.weight * slope) @ system.diff)[:-1, :-1]
        blocks.append(stiff)
    stiff = sp.block_diag(blocks, format="csr")
    C, c = _coupling_blocks(nl, prof.u[:, :-1])
    scale = sp.diags(np.tile(1.0 / np.sqrt(vol), prof.m))
    return scale @ stiff @ scale - C, c


def smallest_eigenvalue(obj, phi, nl, k=3):
    """Smallest eigenvalue of the discrete stability form with zero Dirichlet data.

    Profile1D: staggered stencil of the profile solver; RadialSolution:
    finite-volume radial form (radial perturbations); GridField: symmetric
    face-gradient form averaged over face orientations.
    """
    if isinstance(obj, Profile1D):
        K, c = _profile_form(obj, nl, phi)
        shape = (obj.m, obj.t.size - 2)
    elif isinstance(obj, RadialSolution):
        K, c = _radial_form(obj, nl)
        shape = (obj.profile.m, obj.r.size - 1)
    elif isinstance(obj, GridField):
        K, c = _box_form(obj, nl, phi)
        shape = (obj.m, -1)
    else:
        raise TypeError("expected Profile1D, RadialSolution or GridField")
    K = 0.5 * (K + K.T)
    val, vec, vals, shift = _smallest(K, c, k)
    return EigenResult(float(val), vec.reshape(shape), np.asarray(vals), shift)


# ---------------------------------------------------------------- geometric Poincare


@dataclass
class LevelSetGeometry:
    norm: np.ndarray
    curvature_sq: np.ndarray
    tangential_sq: np.ndarray
    hessian_sq: np.ndarray
    grad_norm_sq: np.ndarray
    valid: np.ndarray


def level_set_geometry(fld, component, floor):
    """Curvature and tangential gradient of |grad u| for one component (2D).

    The Hessian is the central difference of the stored gradients,
    symmetrised.
    """
    if fld.n != 2:
        raise ValueError("level-set geometry is implemented for n = 2")
    g = fld.grads[component]
    H = np.stack([_fd_grad(g[a], fld.spacing) for a in range(2)])
    H = 0.5 * (H + np.swapaxes(H, 0, 1))
    norm = np.sqrt(np.sum(g * g, axis=0))
    valid = norm >= floor
    safe = np.where(valid, norm, 1.0)
    grad_norm = np.einsum("ab...,b...->a...", H, g) / safe
    gn_sq = np.sum(grad_norm**2, axis=0)
    tang = gn_sq - np.sum(g * grad_norm, axis=0) ** 2 / safe**2
    ux, uy = g
    kappa = (H[0, 0] * uy**2 - 2 * ux * uy * H[0, 1] + H[1, 1] * ux**2) / safe**3
    hess_sq = np.sum(H * H, axis=(0, 1))
    zero = np.zeros_like(norm)
    return LevelSetGeometry(norm, np.where(valid, kappa**2, zero), np.where(valid, np.maximum(tang, 0.0), zero),
                            hess_sq, gn_sq, valid)


@dataclass
class PoincareGap:
    gaps: np.ndarray
    coupling: np.ndarray
    curvature: np.ndarray
    tangential: np.ndarray
    rhs: np.ndarray
    excluded: int


def geometric_poincare_gap(fld, phi, nl, tests, floor=None, margin=DEFAULT_MARGIN):
    """RHS - LHS of the geometric Poincare inequality for each eta tuple (2D)."""
    if fld.n != 2:
        raise ValueError("geometric_poincare_gap needs a two-dimensional field")
    floor = default_floor(fld) if floor is None else floor
    mask = interior_mask(fld, margin)
    geo = [level_set_geometry(fld, i, floor) for i in range(fld.m)]
    if not any(np.any(gm.valid & mask) for gm in geo):
        raise GradientFloorViolation("no interior node has a gradient above the floor")
    excluded = int(sum(np.count_nonzero(mask & ~gm.valid) for gm in geo))
    jac = nl.jacobian(fld.values)
    _require_nonnegative_products(nl, fld.values)
    root = np.sqrt(np.clip(coupling_products(nl, fld.values), 0.0, None))
    vol = fld.cell_volume()
    s = np.sum(fld.grads**2, axis=1)
    d1, d2 = phi.dphi(s), _safe_ddphi(phi, s)
    out = {k: [] for k in ("gaps", "coupling", "curvature", "tangential", "rhs")}
    for t in tests:
        eta, deta = t.values, t.grads
        coup = 0.0
        for i in range(fld.m):
            for j in range(fld.m):
                if i == j:
                    continue
                dot = np.sum(fld.grads[i] * fld.grads[j], axis=0)
                term = root[i, j] * geo[i].norm * geo[j].norm * eta[i] * eta[j] - jac[i, j] * dot * eta[i] ** 2
                coup += float(np.sum(term[mask]))
        curv = tang = rhs = 0.0
        for i in range(fld.m):
            gm = geo[i]
            sel = mask & gm.valid
            curv += float(np.sum((d1[i] * s[i] * gm.curvature_sq * eta[i] ** 2)[sel]))
            tang += float(np.sum(((2 * d2[i] * s[i] + d1[i]) * gm.tangential_sq * eta[i] ** 2)[sel]))
            gdot = np.sum(fld.grads[i] * deta[i], axis=0)
            r = 2 * s[i] * d2[i] * gdot**2 + d1[i] * s[i] * np.sum(deta[i] ** 2, axis=0)
            rhs += float(np.sum(r[mask]))
        coup, curv, tang, rhs = coup * vol, curv * vol, tang * vol, rhs * vol
        out["gaps"].append(rhs - (coup + curv + tang))
        out["coupling"].append(coup)
        out["curvature"].append(curv)
        out["tangential"].append(tang)
        out["rhs"].append(rhs)
    return PoincareGap(*(np.array(out[k]) for k in ("gaps", "coupling", "curvature", "tangential", "rhs")), excluded)


# ---------------------------------------------------------------- sigma quotients


@dataclass
class SigmaQuotient:
    sigma: np.ndarray
    valid: np.ndarray
    variation: np.ndarray
    floor: float
    excluded: int
    residual: np.ndarray
    residual_norm: float

    @property
    def max_variation(self):
        return float(np.max(self.variation))


def sigma_constancy(fld, phi, nl, axis, eta, floor=None, margin=DEFAULT_MARGIN):
    """sigma_i = (grad u_i . eta) / d_axis u_i on the interior where |d_axis u_i| >= floor.

    Also reports the residual of
        div(phi_i^2 A(grad u_i) grad sigma_i) + sum_j d_j H_i phi_i phi_j (sigma_j - sigma_i),
    which vanishes for monotone solutions.
    """
    eta = np.asarray(eta, dtype=float)
    if eta.size != fld.n or abs(eta[axis]) > 0:
        raise ValueError("eta must be a vector with zero component along the axis")
    floor = default_floor(fld) if floor is None else floor
    mask = interior_mask(fld, margin)
    phis = fld.grads[:, axis]
    _signs_above_floor(phis, mask, floor)
    psis = np.tensordot(eta, fld.grads, axes=([0], [1]))
    valid = mask[None] & (np.abs(phis) >= floor)
    with np.errstate(divide="ignore", invalid="ignore"):
        sigma = np.where(np.abs(phis) >= floor, psis / np.where(phis == 0, 1.0, phis), np.nan)
    variation = np.array([np.nanmax(sg[v]) - np.nanmin(sg[v]) for sg, v in zip(sigma, valid)])
    excluded = int(np.count_nonzero(mask[None] & ~valid))
    jac = nl.jacobian(fld.values)
    res = np.zeros_like(phis)
    for i in range(fld.m):
        gs = _fd_grad(np.nan_to_num(sigma[i]), fld.spacing)
        flux = phis[i] ** 2 * _apply_A(phi, fld.grads[i], gs)
        res[i] = _divergence(flux, fld.spacing)
        for j in range(fld.m):
            res[i] += jac[i, j] * phis[i] * phis[j] * (np.nan_to_num(sigma[j]) - np.nan_to_num(sigma[i]))
    # the residual is meaningful only where the stencil sees valid sigma values
    core = valid.all(axis=0)
    for a in range(fld.n):
        core = core & np.roll(core, 1, axis=a) & np.roll(core, -1, axis=a)
    res[:, ~core] = 0.0
    return SigmaQuotient(sigma, valid, variation, floor, excluded, res, float(np.max(np.abs(res))))


# ---------------------------------------------------------------- gradient angle


@dataclass
class AngleStats:
    pair: tuple
    theta: np.ndarray
    theta_star: float
    max_deviation: float
    coupling_sign: int
    excluded: int


def gradient_angle(fld, pair, nl, floor=None, margin=DEFAULT_MARGIN):
    """Angle between grad u_i and grad u_j against 0 (positive coupling) or pi (negative)."""
    i, j = pair
    if fld.m < 2 or i == j:
        raise ValueError("need two distinct components")
    floor = default_floor(fld) if floor is None else floor
    mask = interior_mask(fld, margin)
    jac = nl.jacobian(fld.values)[i, j][mask]
    if np.all(jac == 0):
        raise CouplingSignIndeterminate("d_j H_i vanishes on the field")
    if np.any(jac > 0) and np.any(jac < 0):
        raise CouplingSignIndeterminate("the sign of d_j H_i changes on the field")
    sign = 1 if np.any(jac > 0) else -1
    gi, gj = fld.grads[i], fld.grads[j]
    ni, nj = np.sqrt(np.sum(gi * gi, axis=0)), np.sqrt(np.sum(gj * gj, axis=0))
    valid = mask & (ni >= floor) & (nj >= floor)
    cosv = np.sum(gi * gj, axis=0)[valid] / (ni[valid] * nj[valid])
    theta = np.arccos(np.clip(cosv, -1.0, 1.0))
    star = 0.0 if sign > 0 else math.pi
    dev = float(np.max(np.abs(theta - star))) if theta.size else float("nan")
    return AngleStats((i, j), theta, star, dev, sign, int(np.count_nonzero(mask & ~valid)))


# ---------------------------------------------------------------- radial stability


@dataclass
class RadialTest:
    """Radial test function with its derivative and the points where it kinks."""

    fn: object
    dfn: object
    breaks: tuple
    name: str = "custom"


def _radial_interp(rad):
    S = np.sum(np.abs(rad.du) ** rad.p, axis=0)
    return CubicSpline(rad.r, rad.du, axis=1), S


DEGENERATE_RATIO = 1e-12


def require_nondegenerate(rad, r, R):
    """Raise DegenerateDerivative if sum |u_i'|^p vanishes at a node of [r, R]."""
    S = np.sum(np.abs(rad.du) ** rad.p, axis=0)
    sel = (rad.r >= r) & (rad.r <= R)
    top = float(np.max(S)) if S.size else 0.0
    if top <= 0 or not np.any(sel) or float(np.min(S[sel])) <= DEGENERATE_RATIO * top:
        raise DegenerateDerivative(f"sum |u_i'|^p vanishes on [{r:g}, {R:g}]")


def _sum_abs_p(spline, p):
    return lambda t: np.sum(np.abs(spline(t)) ** p, axis=0)


def _integrate(fn, a, b, points=()):
    if b <= a:
        return 0.0
    pts = [x for x in points if a < x < b]
    val, _ = quad(lambda x: float(np.squeeze(fn(x))), a, b, points=pts or None, limit=400, epsabs=1e-13, epsrel=1e-11)
    return float(val)


def piecewise_power_test(rad, r, R):
    """Piecewise test function: 1 on [0,1], t^(-a) on [1,r], a scaled tail integral on [r,R], 0 beyond.

    a = sqrt((n-1)/(p-1)); the tail is proportional to
    int_t^R dz / (z^(n-1) S(z)) with S = sum_i |u_i'|^p.
    """
    n, p = rad.n, rad.p
    require_nondegenerate(rad, r, R)
    a = math.sqrt((n - 1) / (p - 1))
    spl, _ = _radial_interp(rad)
    S = _sum_abs_p(spl, p)
    w = lambda z: 1.0 / (z ** (n - 1) * S(z))
    total = _integrate(w, r, R)
    if not np.isfinite(total) or total <= 0:
        raise DegenerateDerivative("sum |u_i'|^p vanishes on [r, R]")
    c = r ** (-a) / total

    def fn(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros_like(t)
        out[t <= 1] = 1.0
        mid = (t > 1) & (t <= r)
        out[mid] = t[mid] ** (-a)
        tail = (t > r) & (t < R)
        out[tail] = [c * _integrate(w, x, R) for x in t[tail]]
        return out

    def dfn(t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros_like(t)
        mid = (t > 1) & (t < r)
        out[mid] = -a * t[mid] ** (-a - 1)
        tail = (t > r) & (t < R)
        out[tail] = -c * w(t[tail])
        return out

    return RadialTest(fn, dfn, (1.0, r, R), name=f"piecewise(r={r:g}, R={R:g})")


@dataclass
class RadialGap:
    names: list
    lhs: np.ndarray
    rhs: np.ndarray
    tail: np.ndarray
    gaps: np.ndarray


def radial_stability_gap(rad, nl, tests):
    """RHS - LHS of the radial stability inequality (weight r^(n-1)) per test.

    LHS = (n-1) sum_i int |u_i'|^p phi^2 r^(n-3)
    RHS = (p-1) sum_i int |u_i'|^p phi'^2 r^(n-1)
          + sum_ij int (d_j H_i - c_ij) u_i' u_j' phi^2 r^(n-1)
    where c_ij is the coupling matrix of the stability form (so the diagonal
    of the second sum vanishes).
    """
    n, p = rad.n, rad.p
    spl_du, _ = _radial_interp(rad)
    spl_u = CubicSpline(rad.r, rad.u, axis=1)
    S = _sum_abs_p(spl_du, p)
    r0, r1 = float(rad.r[0]), float(rad.r[-1])

    def tail_density(t):
        u = spl_u(t)
        du = spl_du(t)
        jac = nl.jacobian(u)
        c = coupling_matrix(nl, u)
        return np.sum((jac - c) * du[:, None] * du[None, :], axis=(0, 1))

    names, L, Rh, T = [], [], [], []
    for test in tests:
        hi = min(r1, max(test.breaks) if test.breaks else r1)
        pts = tuple(test.breaks)
        lhs = (n - 1) * _integrate(lambda t: S(t) * test.fn(t) ** 2 * t ** (n - 3), max(r0, 1e-300), hi, pts)
        rhs = (p - 1) * _integrate(lambda t: S(t) * test.dfn(t) ** 2 * t ** (n - 1), r0, hi, pts)
        tail = _integrate(lambda t: tail_density(t) * test.fn(t) ** 2 * t ** (n - 1), r0, hi, pts)
        names.append(test.name)
        L.append(lhs)
        Rh.append(rhs + tail)
        T.append(tail)
    L, Rh, T = map(np.asarray, (L, Rh, T))
    return RadialGap(names, L, Rh, T, Rh - L)


def smooth_radial_test(R, name="smooth"):
    """phi(t) = (1 - (t/R)^2)^2 on [0, R]."""
    fn = lambda t: np.where(np.asarray(t) < R, (1 - (np.asarray(t) / R) ** 2) ** 2, 0.0)
    dfn = lambda t: np.where(np.asarray(t) < R, -4 * np.asarray(t) / R**2 * (1 - (np.asarray(t) / R) ** 2), 0.0)
    return RadialTest(fn, dfn, (R,), name)


@dataclass
class LRCheck:
    r: float
    R: float
    integral: float
    constant: float
    bound: float
    holds: bool
    lhs_lower: float
    rhs: float


def lr_check(rad, r, R):
    """int_r^R ds / (s^(n-1) S(s)) against C r^(-2a) with C = (p-1) / ((n-1) int_0^1 S t^(n-3) dt)."""
    n, p = rad.n, rad.p
    require_nondegenerate(rad, r, R)
    a = math.sqrt((n - 1) / (p - 1))
    spl, _ = _radial_interp(rad)
    S = _sum_abs_p(spl, p)
    B = _integrate(lambda z: 1.0 / (z ** (n - 1) * S(z)), r, R)
    inner = _integrate(lambda t: S(t) * t ** (n - 3), max(float(rad.r[0]), 1e-300), 1.0)
    C = (p - 1) / ((n - 1) * inner) if inner > 0 else float("inf")
    bound = C * r ** (-2 * a)
    lhs_lower = (n - 1) * inner + (n - 1) * _integrate(lambda t: S(t) * t ** (-2 * a + n - 3), 1.0, r)
    rhs = (n - 1) * _integrate(lambda t: S(t) * t ** (-2 * a + n - 3), 1.0, r) + (p - 1) * r ** (-2 * a) / B
    return LRCheck(r, R, B, C, bound, bool(B <= bound * (1 + 1e-10)), lhs_lower, rhs)


# ---------------------------------------------------------------- serialisation


def certificate_field(cert, fld):
    """The certificate as a GridField (values phi_i, gradients by central differences)."""
    grads = np.stack([_fd_grad(ph, fld.spacing) for ph in cert.phi_values])
    meta = {"kind": "stability_certificate", "axis": cert.axis, "signs": list(cert.signs),
            "residual_norm": cert.residual_norm, "coupling_margin": cert.coupling_margin,
            "floor": cert.floor, "excluded": cert.excluded, "source": cert.source}
    return GridField(fld.lo, fld.hi, fld.spacing, cert.phi_values.copy(), grads, provenance=fld.provenance,
                     metadata=meta)


def eigen_field(result, fld):
    """Eigenfunction of a GridField eigenproblem embedded on the full grid (zero on the boundary)."""
    op = _BoxOperator(fld.shape, fld.spacing)
    vals = np.zeros((fld.m, int(np.prod(fld.shape))))
    vals[:, op.interior_idx] = result.vector.reshape(fld.m, -1)
    vals = vals.reshape((fld.m,) + fld.shape)
    grads = np.stack([_fd_grad(v, fld.spacing) for v in vals])
    meta = {"kind": "eigenpair", "eigenvalue": result.value, "shift": result.shift,
            "lowest": [float(v) for v in result.values]}
    return GridField(fld.lo, fld.hi, fld.spacing, vals, grads, provenance=fld.provenance, metadata=meta)


def save_certificate(cert, fld, path):
    return save_field(certificate_field(cert, fld), path)


def save_eigenpair(result, fld, path):
    return save_field(eigen_field(result, fld), path)
