"""One-dimensional and radial boundary-value solvers.

The 1D system -(Phi'(u_i'^2) u_i')' = H_i(u) is discretised variationally:
with ``D`` a staggered derivative (nodes -> cell midpoints), the residual is

    R = D^T [Phi'(g^2) g] - H(u),   g = D u,

which is the gradient of a discrete energy. Its Jacobian
D^T diag(Phi' + 2 g^2 Phi'') D - J_H is symmetric whenever H is a gradient.

Radial problems use a finite-volume form on [r_min, R] with zero flux at
r_min (the symmetry condition u'(0) = 0 when r_min = 0) and Dirichlet data
at R.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
import csv
import io

import numpy as np
import scipy.sparse as sp

from .errors import DegenerateGradient, MissingAntiderivative
from .newton import damped_newton
from .phi_models import P_LAPLACIAN, PhiModel, dphi_times_s, make_phi
from .stencils import nodal_derivative, staggered_first_derivative

REGULARIZING_EPSILON = 1e-10


@dataclass(frozen=True)
class Profile1D:
    t: np.ndarray
    u: np.ndarray
    du: np.ndarray
    phi: PhiModel
    nonlinearity: object
    bc: tuple
    residual_norm: float
    iterations: int = 0
    order: int = 4
    metadata: dict = field(default_factory=dict)

    @property
    def m(self):
        return self.u.shape[0]

    @property
    def spacing(self):
        return float(self.t[1] - self.t[0])

    @property
    def num_intervals(self):
        return self.t.size - 1

    def second_derivative(self, order=6):
        d2 = nodal_derivative(self.num_intervals, self.spacing, order, deriv=2)
        return np.stack([d2 @ ui for ui in self.u])

    def to_csv(self):
        return profile_to_csv(self)


@dataclass(frozen=True)
class RadialSolution:
    profile: Profile1D
    n: int
    p: float

    @property
    def r(self):
        return self.profile.t

    @property
    def u(self):
        return self.profile.u

    @property
    def du(self):
        return self.profile.du

    def value_at(self, radius):
        """Piecewise-cubic evaluation of every component at the given radii."""
        from scipy.interpolate import CubicHermiteSpline

        out = [CubicHermiteSpline(self.r, ui, dui)(radius) for ui, dui in zip(self.u, self.du)]
        return np.stack(out)


def _prepare_phi(phi, regularize):
    if phi.singular_at_zero:
        if not regularize:
            return phi, None
        return make_phi(P_LAPLACIAN, phi.p, REGULARIZING_EPSILON), REGULARIZING_EPSILON
    return phi, None


def _seed(t, bc, init):
    bc = np.asarray(bc, dtype=float)
    left, right = bc[:, 0:1], bc[:, 1:2]
    if isinstance(init, np.ndarray):
        return np.array(init, dtype=float)
    s = (t - t[0]) / (t[-1] - t[0])
    if init == "linear":
        return left + (right - left) * s[None]
    if init == "tanh":
        mid = 0.5 * (t[0] + t[-1])
        shape = np.tanh((t - mid) / np.sqrt(2.0))
        shape = (shape - shape[0]) / (shape[-1] - shape[0])
        return left + (right - left) * shape[None]
    raise ValueError(f"unknown init policy {init!r}")


class _ProfileSystem:
    """Residual/Jacobian of the staggered 1D discretisation."""

    def __init__(self, phi, nl, t, bc, order):
        self.phi, self.nl, self.t = phi, nl, t
        self.N = t.size - 1
        self.h = float(t[1] - t[0])
        self.m = nl.m
        self.bc = np.asarray(bc, dtype=float)
        D = staggered_first_derivative(self.N, self.h, order)
        self.D = D
        self.Di = D[:, 1:-1]
        self.Dt = self.Di.T.tocsr()

    def full(self, interior):
        u = np.empty((self.m, self.N + 1))
        u[:, 0], u[:, -1] = self.bc[:, 0], self.bc[:, 1]
        u[:, 1:-1] = interior.reshape(self.m, self.N - 1)
        return u

    def gradient(self, u):
        return np.stack([self.D @ ui for ui in u])

    def residual(self, u):
        g = self.gradient(u)
        s = g * g
        flux = self.phi.dphi(s) * g
        div = np.stack([self.D.T @ fi for fi in flux])
        return div - self.nl.H(u)

    def __call__(self, x):
        u = self.full(x)
        g = self.gradient(u)
        s = g * g
        flux = self.phi.dphi(s) * g
        slope = self.phi.flux_slope(s)
        if not (np.all(np.isfinite(flux)) and np.all(np.isfinite(slope))):
            raise DegenerateGradient("Phi' undefined where u' vanishes; enable regularisation")
        interior = u[:, 1:-1]
        res = np.stack([self.Dt @ fi for fi in flux]) - self.nl.H(interior)
        jh = self.nl.jacobian(interior)
        blocks = [[None] * self.m for _ in range(self.m)]
        for i in range(self.m):
            for j in range(self.m):
                blk = -sp.diags(jh[i, j])
                if i == j:
                    blk = self.Dt @ sp.diags(slope[i]) @ self.Di + blk
                blocks[i][j] = blk
        return res.ravel(), sp.bmat(blocks, format="csr")


def solve_profile(phi, nl, bc, L=20.0, N=2048, init="auto", order=4, tol=1e-10,
                  max_iter=60, pin="auto", regularize=True, domain=None, continuation=True):
    """Solve the 1D system on [-L, L] (or ``domain``) with Dirichlet data.

    ``bc`` holds one (left, right) pair per component. ``init`` is "linear",
    "tanh", "auto" (tanh when some component has distinct end values) or an
    array of shape (m, N+1). ``pin`` removes the near-translation invariance of
    heteroclinic problems: "auto" pins, at the centre node, the component with
    the largest jump to the mean of its end values, using a Lagrange
    multiplier; ``None`` disables it. The reported residual always refers to
    the unmodified equations. With ``continuation`` a p-Laplacian problem
    with p != 2 is first solved at p = 2 and then in steps of at most 0.5 in p.
    """
    if continuation and phi.kind == P_LAPLACIAN and phi.p != 2.0 and not isinstance(init, np.ndarray):
        steps = int(np.ceil(abs(phi.p - 2.0) / 0.5))
        seed = init
        for k in range(steps):
            stage = make_phi(P_LAPLACIAN, 2.0 + (phi.p - 2.0) * k / steps, phi.epsilon)
            seed = solve_profile(stage, nl, bc, L=L, N=N, init=seed, order=order, tol=tol, max_iter=max_iter,
                                 pin=pin, regularize=regularize, domain=domain, continuation=False).u
        return solve_profile(phi, nl, bc, L=L, N=N, init=seed, order=order, tol=tol, max_iter=max_iter,
                             pin=pin, regularize=regularize, domain=domain, continuation=False)
    if not L > 0 or N < 64:
        raise ValueError("need L > 0 and N >= 64")
    bc = tuple(tuple(float(v) for v in pair) for pair in bc)
    if len(bc) != nl.m or not np.all(np.isfinite(bc)):
        raise ValueError("bc must hold one finite (left, right) pair per component")
    if N % 2:
        raise ValueError("N must be even")
    lo, hi = (-L, L) if domain is None else domain
    h = (hi - lo) / N
    t = 0.5 * (lo + hi) + h * (np.arange(N + 1) - N // 2)
    phi_used, eps_used = _prepare_phi(phi, regularize)
    bc_arr = np.asarray(bc)
    jumps = np.abs(bc_arr[:, 1] - bc_arr[:, 0])
    if isinstance(init, str) and init == "auto":
        init = "tanh" if np.any(jumps > 0) else "linear"
    u0 = _seed(t, bc, init)
    system = _ProfileSystem(phi_used, nl, t, bc, order)

    if pin == "auto":
        pin = (int(np.argmax(jumps)), N // 2, float(bc_arr[np.argmax(jumps)].mean())) if np.any(jumps > 0) else None
    x0 = u0[:, 1:-1].ravel()

    if pin is None:
        def measure(x, r):
            return float(np.max(np.abs(r)))
        result = damped_newton(system, x0, tol=tol, max_iter=max_iter, measure=measure)
        x = result.x
    else:
        comp, node, value = pin
        idx = comp * (N - 1) + node - 1
        x0[idx] = value
        nx = x0.size

        def bordered(z):
            res, jac = system(z[:nx])
            res = res.copy()
            res[idx] += z[nx]
            e = sp.csr_matrix(([1.0], ([idx], [0])), shape=(nx, 1))
            jb = sp.bmat([[jac, e], [e.T, None]], format="csr")
            return np.append(res, z[idx] - value), jb

        def measure(z, r):
            true = r[:nx].copy()
            true[idx] -= z[nx]
            return float(max(np.max(np.abs(true)), abs(r[nx])))

        result = damped_newton(bordered, np.append(x0, 0.0), tol=tol, max_iter=max_iter, measure=measure)
        x = result.x[:nx]

    u = system.full(x)
    resid = float(np.max(np.abs(system.residual(u)[:, 1:-1])))
    du = nodal_derivatives(u, h)
    meta = {"pin": pin, "init": init if isinstance(init, str) else "array", "regularized_epsilon": eps_used,
            "newton_history": result.history}
    return Profile1D(t=t, u=u, du=du, phi=phi, nonlinearity=nl, bc=bc, residual_norm=resid,
                     iterations=result.iterations, order=order, metadata=meta)


def nodal_derivatives(u, h, order=6):
    D = nodal_derivative(u.shape[1] - 1, h, order)
    return np.stack([D @ ui for ui in u])


def profile_residual(prof, order=None):
    """Discrete residual at every node (end values are set to zero)."""
    system = _ProfileSystem(_prepare_phi(prof.phi, True)[0] if prof.metadata.get("regularized_epsilon") else prof.phi,
                            prof.nonlinearity, prof.t, prof.bc, order or prof.order)
    r = system.residual(prof.u)
    r[:, 0] = r[:, -1] = 0.0
    return r


def first_integral(prof):
    """E(t) = sum_i [Phi(u_i'^2)/2 - Phi'(u_i'^2) u_i'^2] - potential(u)."""
    nl = prof.nonlinearity
    if not nl.has_potential:
        raise MissingAntiderivative(f"{nl.name} has no antiderivative")
    s = prof.du**2
    phi = prof.phi
    return np.sum(0.5 * phi.phi(s) - dphi_times_s(phi, s), axis=0) - nl.potential(prof.u)


def first_integral_deficit(prof):
    e = first_integral(prof)
    return e - e[0]


def with_values(prof, u, note="modified"):
    """Copy of ``prof`` carrying new values; derivatives are recomputed."""
    u = np.asarray(u, dtype=float)
    return replace(prof, u=u, du=nodal_derivatives(u, prof.spacing),
                   residual_norm=float("nan"), metadata={**prof.metadata, "provenance": note})


def exact_profile(t, u, du, phi, nl, note="closed form"):
    """Wrap closed-form samples as a Profile1D (no solve)."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    du = np.atleast_2d(np.asarray(du, dtype=float))
    bc = tuple((float(a), float(b)) for a, b in zip(u[:, 0], u[:, -1]))
    return Profile1D(t=np.asarray(t, dtype=float), u=u, du=du, phi=phi, nonlinearity=nl, bc=bc,
                     residual_norm=float("nan"), metadata={"provenance": note})


def profile_to_csv(prof):
    """CSV text with columns t, u_1..u_m, du_1..du_m in 17 significant digits."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    m = prof.m
    w.writerow(["t"] + [f"u_{i + 1}" for i in range(m)] + [f"du_{i + 1}" for i in range(m)])
    for k in range(prof.t.size):
        row = [prof.t[k], *prof.u[:, k], *prof.du[:, k]]
        w.writerow([f"{v:.17g}" for v in row])
    return buf.getvalue()


def profile_from_csv(text, phi, nl):
    rows = list(csv.reader(io.StringIO(text)))
    data = np.array(rows[1:], dtype=float)
    m = (data.shape[1] - 1) // 2
    return exact_profile(data[:, 0], data[:, 1:1 + m].T, data[:, 1 + m:].T, phi, nl, note="csv")


class _RadialSystem:
    def __init__(self, phi, nl, r, n, right):
        self.phi, self.nl, self.r, self.n = phi, nl, r, n
        self.N = r.size - 1
        self.h = float(r[1] - r[0])
        self.m = nl.m
        self.right = np.asarray(right, dtype=float)
        mid = 0.5 * (r[1:] + r[:-1])
        self.weight = mid ** (n - 1)
        edges = np.concatenate([[r[0]], mid, [r[-1]]])
        self.volume = (edges[1:] ** n - edges[:-1] ** n) / n
        self.diff = sp.diags([-np.ones(self.N), np.ones(self.N)], [0, 1], shape=(self.N, self.N + 1)) / self.h

    def full(self, x):
        u = np.empty((self.m, self.N + 1))
        u[:, :-1] = x.reshape(self.m, self.N)
        u[:, -1] = self.right
        return u

    def parts(self, u):
        g = np.stack([self.diff @ ui for ui in u])
        s = g * g
        flux = self.weight * self.phi.dphi(s) * g
        div = np.zeros_like(u)
        div[:, :-1] -= flux
        div[:, 1:] += flux
        return g, s, flux, div

    def residual(self, u):
        _, _, _, div = self.parts(u)
        return div / self.volume - self.nl.H(u)

    def __call__(self, x):
        u = self.full(x)
        g, s, flux, div = self.parts(u)
        slope = self.phi.flux_slope(s)
        if not (np.all(np.isfinite(flux)) and np.all(np.isfinite(slope))):
            raise DegenerateGradient("u' vanishes at an interior node of a singular p-Laplacian")
        res = (div / self.volume - self.nl.H(u))[:, :-1]
        jh = self.nl.jacobian(u[:, :-1])
        blocks = [[None] * self.m for _ in range(self.m)]
        inv_vol = sp.diags(1.0 / self.volume[:-1])
        for i in range(self.m):
            stiff = self.h * (self.diff.T @ sp.diags(self.weight * slope[i]) @ self.diff)[:-1, :-1]
            for j in range(self.m):
                blk = -sp.diags(jh[i, j])
                if i == j:
                    blk = inv_vol @ stiff + blk
                blocks[i][j] = blk
        return res.ravel(), sp.bmat(blocks, format="csr")


def solve_radial(phi, nl, n, R, right, r_min=0.0, N=800, init=None, tol=1e-8, max_iter=80,
                 regularize=True, continuation=True):
    """Radial solution of -r^(1-n) (r^(n-1) Phi'(u'^2) u')' = H(u) on [r_min, R].

    Zero flux at r_min (u'(0) = 0 when r_min = 0) and u(R) = ``right``.
    ``phi`` is normally a p-Laplacian model; the Laplacian counts as p = 2.
    ``init`` is None (constant boundary value), an array or a callable of r.
    With ``continuation`` a p-Laplacian problem is reached from the p = 2
    solution in steps of at most 0.5 in p, which avoids the flat-seed
    degeneracy of p > 2.
    """
    if n < 2:
        raise ValueError("n must be >= 2")
    if not (0 <= r_min < R):
        raise ValueError("need 0 <= r_min < R")
    right = np.atleast_1d(np.asarray(right, dtype=float))
    if right.size != nl.m:
        raise ValueError("one boundary value per component")
    p = phi.p if phi.kind == P_LAPLACIAN else 2.0
    r = np.linspace(r_min, R, N + 1)
    if init is None:
        u0 = np.repeat(right[:, None], N + 1, axis=1)
    else:
        u0 = np.array(init(r) if callable(init) else init, dtype=float).reshape(nl.m, N + 1)
    u0[:, -1] = right

    path = [phi]
    if continuation and phi.kind == P_LAPLACIAN and p != 2.0:
        steps = int(np.ceil(abs(p - 2.0) / 0.5))
        path = [make_phi(P_LAPLACIAN, 2.0 + (p - 2.0) * k / steps, phi.epsilon) for k in range(steps)] + [phi]
    history, iterations = [], 0
    for stage in path:
        phi_used, eps_used = _prepare_phi(stage, regularize)
        system = _RadialSystem(phi_used, nl, r, n, right)
        result = damped_newton(system, u0[:, :-1].ravel(), tol=tol, max_iter=max_iter)
        u0 = system.full(result.x)
        history.extend(result.history)
        iterations += result.iterations
    u = u0
    resid = float(np.max(np.abs(system.residual(u)[:, :-1])))
    du = nodal_derivatives(u, system.h)
    if r_min == 0.0:
        du[:, 0] = 0.0
    prof = Profile1D(t=r, u=u, du=du, phi=phi, nonlinearity=nl, bc=tuple((None, float(v)) for v in right),
                     residual_norm=resid, iterations=iterations, order=2,
                     metadata={"regularized_epsilon": eps_used, "newton_history": history,
                               "r_min": r_min, "continuation": [stage.label() for stage in path]})
    return RadialSolution(profile=prof, n=n, p=p)


def radial_residual(rad):
    prof = rad.profile
    phi = _prepare_phi(prof.phi, True)[0] if prof.metadata.get("regularized_epsilon") else prof.phi
    system = _RadialSystem(phi, prof.nonlinearity, prof.t, rad.n, [b for _, b in prof.bc])
    r = system.residual(prof.u)
    r[:, -1] = 0.0
    return r
