"""Fields on uniform boxes in two or three dimensions.

Fields are node-centred. The box discretisation evaluates fluxes
Phi'(|g|^2) g_a at face midpoints, where the face gradient uses the normal
difference across the face and the average of the tangential central
differences at its two end nodes.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace
import json
import struct
from pathlib import Path

import numpy as np
import scipy.sparse as sp
from scipy.interpolate import CubicHermiteSpline

from .errors import DomainTooSmall
from .newton import damped_newton

PLANAR = "planar-from-profile"
NEWTON = "newton-solved"
PERTURBED = "perturbed"
SYNTHETIC = "synthetic"

MAX_3D_NODES = 96**3


@dataclass(frozen=True)
class GridField:
    lo: tuple
    hi: tuple
    spacing: tuple
    values: np.ndarray
    grads: np.ndarray
    provenance: str
    metadata: dict = field(default_factory=dict)

    @property
    def n(self):
        return len(self.lo)

    @property
    def m(self):
        return self.values.shape[0]

    @property
    def shape(self):
        return self.values.shape[1:]

    def axes(self):
        return [lo + h * np.arange(k) for lo, h, k in zip(self.lo, self.spacing, self.shape)]

    def coords(self):
        return np.stack(np.meshgrid(*self.axes(), indexing="ij"))

    @property
    def width(self):
        return tuple(b - a for a, b in zip(self.lo, self.hi))

    def cell_volume(self):
        return float(np.prod(self.spacing))


def box_shape(box, spacing):
    box = [tuple(map(float, b)) for b in box]
    n = len(box)
    spacing = tuple(float(spacing) for _ in range(n)) if np.isscalar(spacing) else tuple(map(float, spacing))
    shape = []
    for (lo, hi), h in zip(box, spacing):
        k = (hi - lo) / h
        if hi <= lo or abs(k - round(k)) > 1e-9 * max(1.0, k):
            raise ValueError(f"extent [{lo}, {hi}] is not a multiple of spacing {h}")
        shape.append(int(round(k)) + 1)
    return box, spacing, tuple(shape)


def _axis_coords(box, spacing, shape):
    return [lo + h * np.arange(k) for (lo, _), h, k in zip(box, spacing, shape)]


def planar_field(prof, direction, box, spacing):
    """Sample u(x) = u*(a . x) on a box; gradients are a times u*'(a . x).

    Values use the cubic Hermite interpolant of (u, u') and derivatives the
    Hermite interpolant of (u', u''), so both are fourth-order accurate in the
    profile spacing.
    """
    a = np.asarray(direction, dtype=float)
    if abs(np.linalg.norm(a) - 1.0) > 1e-12:
        raise ValueError("direction must be a unit vector")
    box, spacing, shape = box_shape(box, spacing)
    if len(box) != a.size:
        raise ValueError("direction and box dimension differ")
    if len(shape) == 3 and np.prod(shape) > MAX_3D_NODES:
        raise ValueError(f"3D grids are capped at {MAX_3D_NODES} nodes")
    corners = np.array(np.meshgrid(*box, indexing="ij")).reshape(a.size, -1)
    proj = a @ corners
    if proj.min() < prof.t[0] - 1e-12 or proj.max() > prof.t[-1] + 1e-12:
        raise DomainTooSmall(
            f"box projects onto [{proj.min():g}, {proj.max():g}], profile covers [{prof.t[0]:g}, {prof.t[-1]:g}]"
        )
    axes = _axis_coords(box, spacing, shape)
    x = np.stack(np.meshgrid(*axes, indexing="ij"))
    s = np.tensordot(a, x, axes=1)
    d2 = prof.second_derivative()
    values = np.stack([CubicHermiteSpline(prof.t, ui, dui)(s) for ui, dui in zip(prof.u, prof.du)])
    deriv = np.stack([CubicHermiteSpline(prof.t, dui, d2i)(s) for dui, d2i in zip(prof.du, d2)])
    grads = deriv[:, None] * a.reshape((1, a.size) + (1,) * len(shape))
    return GridField(
        lo=tuple(b[0] for b in box),
        hi=tuple(b[1] for b in box),
        spacing=spacing,
        values=values,
        grads=grads,
        provenance=PLANAR,
        metadata={"direction": a.tolist(), "profile_spacing": prof.spacing,
                  "profile_residual": prof.residual_norm},
    )


def field_from_function(fn, box, spacing, m=None, provenance=SYNTHETIC, metadata=None):
    """Field from a callable returning (values, grads) at coordinates x of shape (n, ...)."""
    box, spacing, shape = box_shape(box, spacing)
    x = np.stack(np.meshgrid(*_axis_coords(box, spacing, shape), indexing="ij"))
    values, grads = fn(x)
    values = np.asarray(values, dtype=float).reshape((-1,) + shape)
    grads = np.asarray(grads, dtype=float).reshape((values.shape[0], len(shape)) + shape)
    return GridField(tuple(b[0] for b in box), tuple(b[1] for b in box), spacing, values, grads,
                     provenance, dict(metadata or {}))


def constant_field(value, box, spacing):
    value = np.atleast_1d(np.asarray(value, dtype=float))

    def fn(x):
        vals = np.broadcast_to(value.reshape((-1,) + (1,) * (x.ndim - 1)), (value.size,) + x.shape[1:])
        return vals.copy(), np.zeros((value.size, x.shape[0]) + x.shape[1:])

    return field_from_function(fn, box, spacing, provenance=SYNTHETIC, metadata={"constant": value.tolist()})


def fd_gradients(values, spacing):
    """Second-order central differences, one-sided (second order) at the ends."""
    m = values.shape[0]
    n = values.ndim - 1
    out = np.empty((m, n) + values.shape[1:])
    for i in range(m):
        g = np.gradient(values[i], *spacing, edge_order=2)
        if n == 1:
            g = [g]
        out[i] = np.stack(g)
    return out


class _BoxOperator:
    """Sparse face-gradient operators and the assembled residual/Jacobian."""

    def __init__(self, shape, spacing):
        self.shape = shape
        self.spacing = spacing
        self.n = len(shape)
        self.size = int(np.prod(shape))
        idx = np.arange(self.size).reshape(shape)
        interior = np.zeros(shape, dtype=bool)
        interior[tuple(slice(1, -1) for _ in shape)] = True
        self.interior = interior
        self.interior_idx = idx[interior]
        self.faces = []
        for a in range(self.n):
            sl = [slice(1, -1)] * self.n
            sl[a] = slice(0, -1)
            left = idx[tuple(sl)].ravel()
            sl[a] = slice(1, None)
            right = idx[tuple(sl)].ravel()
            nf = left.size
            rows = np.arange(nf)
            comps = []
            for b in range(self.n):
                if b == a:
                    data = np.concatenate([-np.ones(nf), np.ones(nf)]) / spacing[a]
                    mat = sp.csr_matrix((data, (np.tile(rows, 2), np.concatenate([left, right]))),
                                        shape=(nf, self.size))
                else:
                    stride = int(np.prod(shape[b + 1:]))
                    cols = [left + stride, left - stride, right + stride, right - stride]
                    data = np.concatenate([np.ones(nf), -np.ones(nf), np.ones(nf), -np.ones(nf)]) / (4 * spacing[b])
                    mat = sp.csr_matrix((data, (np.tile(rows, 4), np.concatenate(cols))), shape=(nf, self.size))
                comps.append(mat)
            div = sp.csr_matrix(
                (np.concatenate([-np.ones(nf), np.ones(nf)]) / spacing[a],
                 (np.concatenate([left, right]), np.tile(rows, 2))),
                shape=(self.size, nf),
            )
            self.faces.append((comps, div))

    def residual_and_parts(self, phi, u):
        """Return -div(Phi' grad u) per component on all nodes (boundary rows are meaningless)."""
        out = []
        parts = []
        for ui in u:
            ui = ui.ravel()
            acc = np.zeros(self.size)
            comp_parts = []
            for a, (comps, div) in enumerate(self.faces):
                g = [c @ ui for c in comps]
                s = sum(gb * gb for gb in g)
                flux = phi.dphi(s) * g[a]
                # div maps face fluxes to (F_{k-1/2} - F_{k+1/2}) / h, minus the divergence
                acc += div @ flux
                comp_parts.append((g, s))
            out.append(acc)
            parts.append(comp_parts)
        return np.stack(out), parts

    def jacobian_block(self, phi, comp_parts):
        blk = None
        for a, (comps, div) in enumerate(self.faces):
            g, s = comp_parts[a]
            d1 = phi.dphi(s)
            with np.errstate(divide="ignore", invalid="ignore"):
                # Phi''(s) g_a g_b -> 0 as s -> 0 whenever the flux is differentiable there
                d2 = np.where(s > 0, phi.ddphi(s), 0.0)
            mat = sp.diags(d1) @ comps[a]
            for b in range(self.n):
                mat = mat + sp.diags(2.0 * d2 * g[a] * g[b]) @ comps[b]
            term = div @ mat
            blk = term if blk is None else blk + term
        return blk


def _box_residual(op, phi, nl, u):
    div, parts = op.residual_and_parts(phi, u)
    return div - nl.H(u.reshape(u.shape[0], -1)), parts


def residual(fld, phi, nl):
    """Discrete residual -div(Phi' grad u) - H(u) at interior nodes (zero on the boundary)."""
    op = _BoxOperator(fld.shape, fld.spacing)
    r, _ = _box_residual(op, phi, nl, fld.values)
    r = r.reshape(fld.values.shape)
    mask = ~op.interior
    r[:, mask] = 0.0
    return r


def _trace_values(bc, box, spacing, shape, m):
    x = np.stack(np.meshgrid(*_axis_coords(box, spacing, shape), indexing="ij"))
    if isinstance(bc, GridField):
        if bc.shape != shape:
            raise ValueError("boundary field must live on the same grid")
        return bc.values.copy()
    if callable(bc):
        return np.asarray(bc(x), dtype=float).reshape((m,) + shape)
    return np.broadcast_to(np.asarray(bc, dtype=float).reshape((m,) + (1,) * len(shape)), (m,) + shape).copy()


def solve_box(phi, nl, box, spacing, bc, seed=None, tol=1e-8, max_iter=60):
    """Newton solve of the box problem with Dirichlet data.

    ``bc`` is a GridField on the same grid, a callable of x with shape
    (n, ...), or a constant per component; only its boundary trace is used.
    ``seed`` (GridField or array) defaults to the same data as ``bc``.
    """
    box, spacing, shape = box_shape(box, spacing)
    n = len(shape)
    if n not in (2, 3):
        raise ValueError("solve_box supports n = 2 or 3")
    if min(shape) < 32:
        raise ValueError("need at least 32 nodes per axis")
    if n == 3 and np.prod(shape) > MAX_3D_NODES:
        raise ValueError(f"3D grids are capped at {MAX_3D_NODES} nodes")
    m = nl.m
    trace = _trace_values(bc, box, spacing, shape, m)
    if not np.all(np.isfinite(trace)):
        raise ValueError("boundary data must be finite")
    if seed is None:
        u0 = trace.copy()
    else:
        u0 = (seed.values if isinstance(seed, GridField) else np.asarray(seed, dtype=float)).copy()
        op_mask = np.zeros(shape, dtype=bool)
        op_mask[tuple(slice(1, -1) for _ in shape)] = True
        u0[:, ~op_mask] = trace[:, ~op_mask]
    op = _BoxOperator(shape, spacing)
    ii = op.interior_idx
    ni = ii.size

    def full(x):
        u = u0.reshape(m, -1).copy()
        u[:, ii] = x.reshape(m, ni)
        return u

    def system(x):
        u = full(x)
        r, parts = _box_residual(op, phi, nl, u)
        jh = nl.jacobian(u[:, ii])
        blocks = [[None] * m for _ in range(m)]
        for i in range(m):
            lap = op.jacobian_block(phi, parts[i])[ii][:, ii]
            for j in range(m):
                blk = -sp.diags(jh[i, j])
                blocks[i][j] = lap + blk if i == j else blk
        return r[:, ii].ravel(), sp.bmat(blocks, format="csr")

    result = damped_newton(system, u0.reshape(m, -1)[:, ii].ravel(), tol=tol, max_iter=max_iter)
    values = full(result.x).reshape((m,) + shape)
    grads = fd_gradients(values, spacing)
    return GridField(
        lo=tuple(b[0] for b in box),
        hi=tuple(b[1] for b in box),
        spacing=spacing,
        values=values,
        grads=grads,
        provenance=NEWTON,
        metadata={"residual": result.residual, "iterations": result.iterations, "phi": phi.label(),
                  "nonlinearity": nl.name},
    )


def _bump(z2):
    out = np.zeros_like(z2)
    inside = z2 < 1.0
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - z2[inside]))
    return out


def perturb(fld, amplitude, seed=0, count=6, radius_fraction=0.15):
    """Add smooth compactly supported bumps to every component.

    Each bump is exp(1 - 1/(1 - |z|^2)) in the scaled variable z, so its peak
    is 1; gradients are added analytically. Amplitude 0 returns an identical
    field.
    """
    if amplitude < 0:
        raise ValueError("amplitude must be >= 0")
    if amplitude == 0:
        return replace(fld, values=fld.values.copy(), grads=fld.grads.copy())
    rng = np.random.default_rng(seed)
    x = fld.coords()
    width = np.asarray(fld.width)
    lo = np.asarray(fld.lo)
    values, grads = fld.values.copy(), fld.grads.copy()
    shape_n = (fld.n,) + (1,) * fld.n
    for i in range(fld.m):
        for _ in range(count):
            center = lo + width * rng.uniform(0.25, 0.75, size=fld.n)
            rho = radius_fraction * float(width.min()) * rng.uniform(0.7, 1.3)
            weight = amplitude * rng.uniform(-1.0, 1.0)
            z = (x - center.reshape(shape_n)) / rho
            z2 = np.sum(z * z, axis=0)
            b = _bump(z2)
            with np.errstate(divide="ignore", invalid="ignore"):
                db = np.where(z2 < 1.0, -b / (1.0 - z2) ** 2, 0.0)
            values[i] += weight * b
            grads[i] += weight * db[None] * 2.0 * z / rho
    return replace(fld, values=values, grads=grads, provenance=PERTURBED,
                   metadata={**fld.metadata, "perturbation": {"amplitude": amplitude, "seed": seed, "count": count}})


_MAGIC = b"QLFIELD1"


def save_field(fld, path):
    """Write ``path`` (binary) and ``path.json`` (metadata sidecar)."""
    path = Path(path)
    n, m = fld.n, fld.m
    header = _MAGIC + struct.pack("<qq", n, m) + struct.pack(f"<{n}q", *fld.shape)
    header += struct.pack(f"<{3 * n}d", *fld.lo, *fld.hi, *fld.spacing)
    payload = np.ascontiguousarray(fld.values, dtype="<f8").tobytes() + np.ascontiguousarray(fld.grads, dtype="<f8").tobytes()
    path.write_bytes(header + payload)
    side = {"provenance": fld.provenance, "metadata": _jsonable(fld.metadata), "n": n, "m": m,
            "shape": list(fld.shape), "layout": "values[m, *shape] then grads[m, n, *shape], little-endian float64"}
    Path(str(path) + ".json").write_text(json.dumps(side, sort_keys=True, indent=2))


def load_field(path):
    path = Path(path)
    raw = path.read_bytes()
    if raw[:8] != _MAGIC:
        raise ValueError("not a field file")
    off = 8
    n, m = struct.unpack_from("<qq", raw, off)
    off += 16
    shape = struct.unpack_from(f"<{n}q", raw, off)
    off += 8 * n
    nums = struct.unpack_from(f"<{3 * n}d", raw, off)
    off += 24 * n
    count = m * int(np.prod(shape))
    values = np.frombuffer(raw, dtype="<f8", count=count, offset=off).reshape((m,) + shape).copy()
    off += 8 * count
    grads = np.frombuffer(raw, dtype="<f8", count=count * n, offset=off).reshape((m, n) + shape).copy()
    side_path = Path(str(path) + ".json")
    side = json.loads(side_path.read_text()) if side_path.exists() else {}
    return GridField(tuple(nums[:n]), tuple(nums[n:2 * n]), tuple(nums[2 * n:]), values, grads,
                     side.get("provenance", "unknown"), side.get("metadata", {}))


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj
