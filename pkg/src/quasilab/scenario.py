"""Declarative scenarios: INI files describing a solve and the checks to run on it.

Layout::

    [scenario]      name, seed
    [phi]           kind, p, epsilon
    [nonlinearity]  name plus its parameters (kappa, beta, m, c)
    [geometry]      type = profile | radial | planar | box, plus geometry keys
    [solver]        tol, max_iter
    [check NAME]    one section per diagnostic; tolerance, required, expect, parameters
"""
from __future__ import annotations

from dataclasses import dataclass, field
import configparser
import math
from pathlib import Path
import re

import numpy as np

from . import diagnostics as dg
from . import grid_solver as gs
from . import liouville_bounds as lb
from . import nonlinearity as nlm
from . import phi_models as pm
from . import profile_solver as ps
from . import stability_lab as sl
from .errors import QuasilabError, ScenarioParseError, ScenarioValidationError
from .report import Check, DiagnosticsReport

GEOMETRIES = ("profile", "radial", "planar", "box")
GRID_GEOMETRIES = ("planar", "box")
SCENARIO_DIR = Path(__file__).resolve().parent / "scenarios"

ANCHORS = dict(dg.ANCHORS)
ANCHORS.update({
    "tanh_error": "closed-form heteroclinic of the Allen-Cahn equation",
    "alpha_star": "critical rescaling exponent of the monotonicity formula",
    "stability_gap": "stability inequality for stable solutions of symmetric systems",
    "smallest_eigenvalue": "nonnegativity of the stability quadratic form",
    "poincare": "geometric Poincare inequality for stable solutions in the plane",
    "sigma": "constancy of the sigma quotients for monotone solutions",
    "gradient_angle": "angle law between gradients of coupled components",
    "monotone_certificate": "derivative of a monotone solution solves the linearised system",
    "radial_stability": "radial stability inequality with the piecewise test function",
    "lr_bound": "weighted integral bound for radial stable solutions",
    "holder_chain": "Holder step in the radial lower bound",
})


@dataclass
class CheckSpec:
    name: str
    params: dict = field(default_factory=dict)
    tolerance: float | None = None
    required: bool = True
    expect: str = "pass"
    reader: object = None


@dataclass
class Scenario:
    name: str
    seed: int
    phi: dict
    nonlinearity: dict
    geometry: dict
    solver: dict
    checks: list
    source: str = ""
    text: str = ""


# ---------------------------------------------------------------- parsing


def _locate(text, section, key):
    """(line, column) of ``key`` inside ``[section]`` (1-based), or (None, None)."""
    current = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            current = stripped[1:-1].strip()
            continue
        if current == section:
            m = re.match(r"\s*([^=:\s]+)\s*[=:]\s*", line)
            if m and m.group(1) == key:
                return lineno, m.end() + 1
    return None, None


class _Reader:
    def __init__(self, text, section, items):
        self.text, self.section, self.items = text, section, dict(items)
        self.used = set()

    def _fail(self, key, message):
        line, col = _locate(self.text, self.section, key)
        raise ScenarioParseError(f"[{self.section}] {key}: {message}", line, col)

    def raw(self, key, default=None):
        self.used.add(key)
        return self.items.get(key, default)

    def has(self, key):
        return key in self.items

    def str(self, key, default=None):
        v = self.raw(key, default)
        return v.strip() if isinstance(v, str) else v

    def float(self, key, default=None):
        v = self.raw(key)
        if v is None:
            return default
        try:
            return float(v)
        except ValueError:
            self._fail(key, f"expected a number, got {v!r}")

    def int(self, key, default=None):
        v = self.raw(key)
        if v is None:
            return default
        try:
            return int(v)
        except ValueError:
            self._fail(key, f"expected an integer, got {v!r}")

    def bool(self, key, default=None):
        v = self.raw(key)
        if v is None:
            return default
        low = v.strip().lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        self._fail(key, f"expected a boolean, got {v!r}")

    def floats(self, key, default=None):
        v = self.raw(key)
        if v is None:
            return default
        try:
            return [float(x) for x in v.split(",") if x.strip()]
        except ValueError:
            self._fail(key, f"expected comma-separated numbers, got {v!r}")

    def ranges(self, key, default=None, sep=","):
        """'a:b, c:d' -> [(a, b), (c, d)]."""
        v = self.raw(key)
        if v is None:
            return default
        out = []
        try:
            for part in v.split(sep):
                if part.strip():
                    a, b = part.split(":")
                    out.append((float(a), float(b)))
        except ValueError:
            self._fail(key, f"expected pairs lo:hi separated by {sep!r}, got {v!r}")
        return out

    def radii(self, key, default=None):
        """'start:stop:count' (evenly spaced) or a comma-separated list."""
        v = self.raw(key)
        if v is None:
            return default
        try:
            if ":" in v:
                a, b, c = v.split(":")
                return [float(x) for x in np.linspace(float(a), float(b), int(c))]
            return [float(x) for x in v.split(",") if x.strip()]
        except ValueError:
            self._fail(key, f"expected start:stop:count or a list, got {v!r}")


def _configparser():
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    cp.optionxform = str
    return cp


def parse_scenario(text, source=""):
    cp = _configparser()
    try:
        cp.read_string(text, source=source or "<scenario>")
    except configparser.MissingSectionHeaderError as exc:
        raise ScenarioParseError("missing section header", exc.lineno, 1) from exc
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ScenarioParseError("malformed line", line, 1) from exc
    except configparser.DuplicateSectionError as exc:
        raise ScenarioParseError(f"duplicate section {exc.section!r}", exc.lineno, 1) from exc
    except configparser.DuplicateOptionError as exc:
        raise ScenarioParseError(f"duplicate key {exc.option!r} in [{exc.section}]", exc.lineno, 1) from exc
    except configparser.Error as exc:
        raise ScenarioParseError(str(exc)) from exc
    for required in ("scenario", "phi", "nonlinearity", "geometry"):
        if not cp.has_section(required):
            raise ScenarioParseError(f"missing section [{required}]")
    head = _Reader(text, "scenario", cp.items("scenario"))
    name = head.str("name", Path(source).stem if source else "scenario")
    seed = head.int("seed", 0)
    checks = []
    for sec in cp.sections():
        if sec.startswith("check "):
            rd = _Reader(text, sec, cp.items(sec))
            spec = CheckSpec(
                name=sec[len("check "):].strip(),
                tolerance=rd.float("tolerance"),
                required=rd.bool("required", True),
                expect=rd.str("expect", "pass"),
            )
            spec.params = {k: v for k, v in rd.items.items() if k not in ("tolerance", "required", "expect")}
            spec.reader = rd
            checks.append(spec)
        elif sec not in ("scenario", "phi", "nonlinearity", "geometry", "solver"):
            raise ScenarioParseError(f"unknown section [{sec}]", _section_line(text, sec), 1)
    return Scenario(
        name=name,
        seed=seed,
        phi=dict(cp.items("phi")),
        nonlinearity=dict(cp.items("nonlinearity")),
        geometry=dict(cp.items("geometry")),
        solver=dict(cp.items("solver")) if cp.has_section("solver") else {},
        checks=checks,
        source=str(source),
        text=text,
    )


def _section_line(text, section):
    for lineno, line in enumerate(text.splitlines(), start=1):
        if line.strip() == f"[{section}]":
            return lineno
    return None


def resolve_scenario_path(spec):
    """A path, or the name of a bundled scenario (with or without .ini)."""
    path = Path(spec)
    if path.exists():
        return path
    stem = path.name[:-4] if path.name.endswith(".ini") else path.name
    bundled = SCENARIO_DIR / f"{stem}.ini"
    if bundled.exists():
        return bundled
    raise FileNotFoundError(f"no scenario file or bundled scenario named {spec!r}")


def bundled_scenarios():
    return sorted(SCENARIO_DIR.glob("*.ini"))


def load_scenario(spec):
    path = resolve_scenario_path(spec)
    return parse_scenario(path.read_text(), str(path))


# ---------------------------------------------------------------- building blocks


def build_phi(sc):
    rd = _Reader(sc.text, "phi", sc.phi)
    kind = rd.str("kind")
    if kind is None:
        raise ScenarioValidationError("phi.kind", "missing")
    try:
        return pm.make_phi(kind, p=rd.float("p"), epsilon=rd.float("epsilon", 0.0))
    except (ValueError, QuasilabError) as exc:
        raise ScenarioValidationError("phi", str(exc)) from exc


NONLINEARITY_PARAMS = {"kappa": float, "beta": float, "m": int, "c": float}


def build_nonlinearity(sc):
    rd = _Reader(sc.text, "nonlinearity", sc.nonlinearity)
    name = rd.str("name")
    if name is None:
        raise ScenarioValidationError("nonlinearity.name", "missing")
    params = {}
    for key in sc.nonlinearity:
        if key == "name":
            continue
        if key not in NONLINEARITY_PARAMS:
            raise ScenarioValidationError(f"nonlinearity.{key}", "unknown parameter")
        params[key] = rd.int(key) if NONLINEARITY_PARAMS[key] is int else rd.float(key)
    try:
        return nlm.make_nonlinearity(name, **params)
    except (TypeError, ValueError, KeyError, QuasilabError) as exc:
        raise ScenarioValidationError("nonlinearity", str(exc)) from exc


@dataclass
class Geometry:
    kind: str
    length: float = 20.0
    nodes: int = 2048
    order: int = 4
    bc: list = field(default_factory=list)
    direction: list = field(default_factory=list)
    box: list = field(default_factory=list)
    spacing: float = 0.1
    bend: float = 0.0
    perturb: float = 0.0
    dimension: int = 2
    radius: float = 10.0
    right: list = field(default_factory=list)
    init: list = field(default_factory=list)

    @property
    def n(self):
        if self.kind in GRID_GEOMETRIES:
            return len(self.box)
        if self.kind == "radial":
            return self.dimension
        return 1


def build_geometry(sc, m):
    rd = _Reader(sc.text, "geometry", sc.geometry)
    kind = rd.str("type")
    if kind not in GEOMETRIES:
        raise ScenarioValidationError("geometry.type", f"expected one of {GEOMETRIES}, got {kind!r}")
    g = Geometry(kind)
    if kind in ("profile",) + GRID_GEOMETRIES:
        g.length = rd.float("length", 20.0)
        g.nodes = rd.int("nodes", 2048)
        g.order = rd.int("order", 4)
        g.bc = rd.ranges("bc", sep=";")
        if g.bc is None or len(g.bc) != m:
            raise ScenarioValidationError("geometry.bc", f"need {m} pairs left:right separated by ';'")
    if kind in GRID_GEOMETRIES:
        g.box = rd.ranges("box")
        if not g.box or len(g.box) not in (2, 3):
            raise ScenarioValidationError("geometry.box", "need 2 or 3 intervals lo:hi")
        g.direction = rd.floats("direction")
        if g.direction is None or len(g.direction) != len(g.box):
            raise ScenarioValidationError("geometry.direction", "need one entry per box axis")
        norm = math.sqrt(sum(a * a for a in g.direction))
        if abs(norm - 1.0) > 1e-9:
            raise ScenarioValidationError("geometry.direction", "must be a unit vector")
        g.spacing = rd.float("spacing", 0.1)
        g.perturb = rd.float("perturb", 0.0)
        if g.perturb < 0:
            raise ScenarioValidationError("geometry.perturb", "must be nonnegative")
        if kind == "box":
            g.bend = rd.float("bend", 0.0)
            if g.bend and len(g.box) != 2:
                raise ScenarioValidationError("geometry.bend", "bent boundary data is two-dimensional only")
    if kind == "radial":
        g.dimension = rd.int("dimension", 3)
        g.radius = rd.float("radius", 10.0)
        g.nodes = rd.int("nodes", 800)
        g.right = rd.floats("right")
        if g.right is None or len(g.right) != m:
            raise ScenarioValidationError("geometry.right", f"need {m} Dirichlet values")
        g.init = rd.floats("init", [])
        if g.init and len(g.init) != m:
            raise ScenarioValidationError("geometry.init", f"need {m} constant seed values")
    unknown = set(sc.geometry) - rd.used - {"type"}
    if unknown:
        raise ScenarioValidationError(f"geometry.{sorted(unknown)[0]}", f"not a {kind} geometry key")
    return g


# ---------------------------------------------------------------- checks


def _default_radii(fld, margin=dg.DEFAULT_MARGIN, count=20, start=0.5):
    width = min(fld.width) * (1 - 2 * margin)
    return list(np.linspace(start, 0.45 * width, count))


def _interior_width(fld, margin=dg.DEFAULT_MARGIN):
    return min(fld.width) * (1 - 2 * margin)


def _h2(fld):
    return max(fld.spacing) ** 2


def check_first_integral(ctx, spec):
    d = ps.first_integral_deficit(ctx.solution)
    v = float(np.max(np.abs(d)))
    ctx.report.add_series("first_integral", t=ctx.solution.t, deficit=d)
    return [Check("first_integral", "scalar", v, v, ctx.tol(spec, 1e-8), ANCHORS["first_integral"],
                  "sup-norm deviation from the mean value")]


def check_tanh_error(ctx, spec):
    prof = ctx.solution
    err = float(np.max(np.abs(prof.u[0] - np.tanh(prof.t / math.sqrt(2.0)))))
    return [Check("tanh_error", "scalar", err, err, ctx.tol(spec, 1e-6), ANCHORS["tanh_error"],
                  "max |u - tanh(t/sqrt 2)|")]


def check_alpha_star(ctx, spec):
    rd = spec.reader
    expected = rd.float("expected")
    if expected is None:
        expected = ctx.phi.p if ctx.phi.kind == pm.P_LAPLACIAN else 2.0
    value = pm.alpha_star(ctx.phi)
    err = abs(value - expected)
    return [Check("alpha_star", "scalar", value, err, ctx.tol(spec, 1e-6), ANCHORS["alpha_star"],
                  f"expected {expected:g}")]


def check_pointwise_deficit(ctx, spec):
    fld = ctx.solution
    res = dg.pointwise_deficit(fld, ctx.phi, ctx.nl)
    return [res.check(ctx.tol(spec, 1e-6 + 50 * _h2(fld)))]


def check_hamiltonian_flux(ctx, spec):
    fld = ctx.solution
    rd = spec.reader
    axis = rd.int("axis", fld.n - 1)
    sf = dg.hamiltonian_slices(fld, ctx.phi, ctx.nl, axis)
    res, scale = dg.flux_identity_residual(sf, fld, ctx.phi)
    v = float(np.max(np.abs(res))) / scale if scale > 0 else 0.0
    ctx.report.add_series("hamiltonian_flux", position=sf.positions, gamma=sf.gamma, residual=res)
    return [Check("hamiltonian_flux", "series", v, v, ctx.tol(spec, 1e-4), ANCHORS["flux_identity"],
                  f"axis {axis}; sup residual relative to the largest term")]


def check_monotonicity(ctx, spec):
    fld = ctx.solution
    rd = spec.reader
    alpha = rd.float("alpha")
    if alpha is None:
        raise ScenarioValidationError(f"check {spec.name}.alpha", "required")
    radii = rd.radii("radii") or _default_radii(fld)
    res = dg.monotonicity_I(fld, ctx.phi, ctx.nl, alpha, radii)
    ctx.report.add_series(f"monotonicity_alpha{alpha:g}", r=res.radii, I=res.I, dI=res.dI, bound=res.bound)
    checks = res.checks(spec.required)
    if spec.tolerance is not None:
        for c in checks:
            c.tolerance = spec.tolerance * ctx.tol_scale
    else:
        for c in checks:
            c.tolerance *= ctx.tol_scale
    for c in checks:
        c.name = f"{c.name}_alpha{alpha:g}"
    return checks


def check_pohozaev(ctx, spec):
    fld = ctx.solution
    rd = spec.reader
    r = rd.float("radius", 0.4 * _interior_width(fld))
    res = dg.pohozaev_residual(fld, ctx.phi, ctx.nl, r)
    return [res.check(ctx.tol(spec, 50 * _h2(fld)), spec.required)]


def check_energy_growth(ctx, spec):
    fld = ctx.solution
    rd = spec.reader
    radii = rd.radii("radii") or list(np.geomspace(0.25 * _interior_width(fld), 0.45 * _interior_width(fld), 12))
    res = dg.energy_bounds(fld, ctx.phi, ctx.nl, radii)
    ctx.report.add_series("energy_growth", R=res.radii, J=res.J, E=res.E)
    c = res.upper_check(ctx.tol(spec, 0.1), spec.required)
    return [c]


def check_stability_gap(ctx, spec):
    fld = ctx.solution
    rd = spec.reader
    tests = sl.random_test_tuples(fld, rd.int("count", 50), seed=ctx.seed)
    res = sl.stability_quadratic_gap(fld, ctx.phi, ctx.nl, tests)
    v = -res.min_relative()
    ctx.report.add_series("stability_gap", gap=res.gaps, lhs=res.lhs, rhs=res.rhs)
    return [Check("stability_gap", "series", v, v, ctx.tol(spec, 1e-8), ANCHORS["stability_gap"],
                  f"{len(tests)} test tuples; violation = -min gap / max(|lhs|, |rhs|)")]


def check_smallest_eigenvalue(ctx, spec):
    res = sl.smallest_eigenvalue(ctx.solution, ctx.phi, ctx.nl)
    return [Check("smallest_eigenvalue", "scalar", res.value, -res.value, ctx.tol(spec, 1e-6),
                  ANCHORS["smallest_eigenvalue"], f"lowest eigenvalues {np.array2string(res.values, precision=6)}")]


def check_poincare(ctx, spec):
    fld = ctx.solution
    rd = spec.reader
    tests = sl.random_test_tuples(fld, rd.int("count", 30), seed=ctx.seed)
    res = sl.geometric_poincare_gap(fld, ctx.phi, ctx.nl, tests, floor=rd.float("floor"))
    scale = max(float(np.max(np.abs(res.rhs))), 1e-300)
    v = -float(np.min(res.gaps)) / scale
    ctx.report.add_series("poincare", gap=res.gaps, coupling=res.coupling, curvature=res.curvature,
                          tangential=res.tangential, rhs=res.rhs)
    return [Check("poincare", "series", v, v, ctx.tol(spec, 50 * _h2(fld)), ANCHORS["poincare"],
                  f"{len(tests)} tests; {res.excluded} nodes below the gradient floor")]


def check_sigma(ctx, spec):
    fld = ctx.solution
    rd = spec.reader
    axis = rd.int("axis", fld.n - 1)
    eta = rd.floats("eta") or [1.0 if k == 0 else 0.0 for k in range(fld.n)]
    res = sl.sigma_constancy(fld, ctx.phi, ctx.nl, axis, eta, floor=rd.float("floor"))
    v = res.max_variation
    return [Check("sigma", "scalar", list(res.variation), v, ctx.tol(spec, 1e-6), ANCHORS["sigma"],
                  f"axis {axis}; residual of the sigma identity {res.residual_norm:.3e}; {res.excluded} nodes excluded")]


def check_gradient_angle(ctx, spec):
    fld = ctx.solution
    rd = spec.reader
    pair = tuple(int(x) for x in (rd.floats("pair") or [0, 1]))
    res = sl.gradient_angle(fld, pair, ctx.nl, floor=rd.float("floor"))
    return [Check("gradient_angle", "scalar", res.max_deviation, res.max_deviation, ctx.tol(spec, 1e-3),
                  ANCHORS["gradient_angle"], f"pair {pair}; expected angle {res.theta_star:.6f}")]


def check_monotone_certificate(ctx, spec):
    fld = ctx.solution
    rd = spec.reader
    axis = rd.int("axis", fld.n - 1)
    cert = sl.monotone_certificate(fld, ctx.phi, ctx.nl, axis, floor=rd.float("floor"))
    out = [Check("monotone_certificate", "scalar", cert.residual_norm, cert.residual_norm,
                 ctx.tol(spec, 10 * _h2(fld)), ANCHORS["monotone_certificate"],
                 f"axis {axis}; signs {cert.signs}; {cert.excluded} nodes below the floor")]
    if fld.m > 1:
        out.append(Check("coupling_margin", "scalar", cert.coupling_margin, -cert.coupling_margin, 0.0,
                         ANCHORS["monotone_certificate"], "min over nodes and pairs of d_j H_i phi_i phi_j"))
    return out


def _radial_window(ctx, rd):
    rad = ctx.solution
    top = float(rad.r[-1])
    return rd.float("r", min(2.0, top / 4)), rd.float("R", min(8.0, 0.9 * top))


def check_radial_stability(ctx, spec):
    rad = ctx.solution
    rd = spec.reader
    r, R = _radial_window(ctx, rd)
    eig = sl.smallest_eigenvalue(rad, ctx.phi, ctx.nl)
    certified = eig.value >= -1e-6
    tests = [sl.smooth_radial_test(R), sl.piecewise_power_test(rad, r, R)]
    res = sl.radial_stability_gap(rad, ctx.nl, tests)
    scale = max(float(np.max(np.abs(res.rhs))), float(np.max(np.abs(res.lhs))), 1e-300)
    v = -float(np.min(res.gaps)) / scale
    lr = sl.lr_check(rad, r, R)
    ctx.report.add_series("radial_stability", lhs=res.lhs, rhs=res.rhs, tail=res.tail, gap=res.gaps)
    note = "certified stable by the radial eigenvalue" if certified else "no stability certificate: exploratory"
    req = spec.required and certified
    return [
        Check("radial_stability", "series", v, v, ctx.tol(spec, 1e-8), ANCHORS["radial_stability"],
              f"r={r:g}, R={R:g}; {note}", req),
        Check("lr_bound", "scalar", lr.integral, (lr.integral - lr.bound) / max(lr.bound, 1e-300), 1e-10,
              ANCHORS["lr_bound"], f"constant {lr.constant:.6e}", req),
    ]


def check_holder_chain(ctx, spec):
    rd = spec.reader
    r, R = _radial_window(ctx, rd)
    hc = lb.holder_chain_check(ctx.solution, r, R)
    v = -hc.slack / max(hc.holder_rhs, 1e-300)
    return [Check("holder_chain", "scalar", hc.slack, v, ctx.tol(spec, 1e-10), ANCHORS["holder_chain"],
                  f"r={r:g}, R={R:g}; " + "; ".join(hc.notes))]


@dataclass
class CheckKind:
    fn: object
    geometries: tuple
    scalar_only: bool = False
    system_only: bool = False
    planar_2d: bool = False


CHECKS = {
    "first_integral": CheckKind(check_first_integral, ("profile",)),
    "tanh_error": CheckKind(check_tanh_error, ("profile",), scalar_only=True),
    "alpha_star": CheckKind(check_alpha_star, GEOMETRIES),
    "pointwise_deficit": CheckKind(check_pointwise_deficit, GRID_GEOMETRIES, scalar_only=True),
    "hamiltonian_flux": CheckKind(check_hamiltonian_flux, GRID_GEOMETRIES),
    "monotonicity": CheckKind(check_monotonicity, GRID_GEOMETRIES),
    "pohozaev": CheckKind(check_pohozaev, GRID_GEOMETRIES),
    "energy_growth": CheckKind(check_energy_growth, GRID_GEOMETRIES),
    "stability_gap": CheckKind(check_stability_gap, GRID_GEOMETRIES),
    "smallest_eigenvalue": CheckKind(check_smallest_eigenvalue, GEOMETRIES),
    "poincare": CheckKind(check_poincare, GRID_GEOMETRIES, planar_2d=True),
    "sigma": CheckKind(check_sigma, GRID_GEOMETRIES),
    "gradient_angle": CheckKind(check_gradient_angle, GRID_GEOMETRIES, system_only=True),
    "monotone_certificate": CheckKind(check_monotone_certificate, GRID_GEOMETRIES),
    "radial_stability": CheckKind(check_radial_stability, ("radial",)),
    "holder_chain": CheckKind(check_holder_chain, ("radial",)),
}


@dataclass
class Prepared:
    scenario: Scenario
    phi: object
    nl: object
    geometry: Geometry


def validate(sc):
    """Static validation: builds Phi, H and the geometry and checks compatibility."""
    phi = build_phi(sc)
    nl = build_nonlinearity(sc)
    geo = build_geometry(sc, nl.m)
    if geo.kind == "radial" and phi.kind not in (pm.P_LAPLACIAN, pm.LAPLACIAN):
        raise ScenarioValidationError("phi.kind", "radial problems use the p-Laplacian family")
    for spec in sc.checks:
        field_name = f"check {spec.name}"
        kind = CHECKS.get(spec.name)
        if kind is None:
            raise ScenarioValidationError(field_name, f"unknown check; known: {', '.join(sorted(CHECKS))}")
        if geo.kind not in kind.geometries:
            raise ScenarioValidationError(field_name, f"not available for {geo.kind} geometry")
        if kind.scalar_only and nl.m != 1:
            raise ScenarioValidationError(field_name, f"requires m = 1, nonlinearity has m = {nl.m}")
        if kind.system_only and nl.m < 2:
            raise ScenarioValidationError(field_name, "requires a system (m >= 2)")
        if kind.planar_2d and geo.n != 2:
            raise ScenarioValidationError(field_name, "requires a two-dimensional box")
        if spec.expect not in ("pass", "violation"):
            raise ScenarioValidationError(f"{field_name}.expect", "must be 'pass' or 'violation'")
        if spec.name == "tanh_error" and (nl.name != "allen_cahn" or phi.kind != pm.LAPLACIAN):
            raise ScenarioValidationError(field_name, "closed form known only for Allen-Cahn with the Laplacian")
    return Prepared(sc, phi, nl, geo)


# ---------------------------------------------------------------- solving


def _solver_settings(sc):
    rd = _Reader(sc.text, "solver", sc.solver)
    return {"tol": rd.float("tol"), "max_iter": rd.int("max_iter")}


def _solve_profile(prep):
    geo = prep.geometry
    opts = {k: v for k, v in _solver_settings(prep.scenario).items() if v is not None}
    return ps.solve_profile(prep.phi, prep.nl, geo.bc, L=geo.length, N=geo.nodes, order=geo.order, **opts)


def solve(prep):
    """Return the solution object for the scenario's geometry."""
    geo = prep.geometry
    if geo.kind == "profile":
        return _solve_profile(prep)
    if geo.kind == "radial":
        opts = {k: v for k, v in _solver_settings(prep.scenario).items() if v is not None}
        init = None
        if geo.init:
            init = np.repeat(np.asarray(geo.init, dtype=float)[:, None], geo.nodes + 1, axis=1)
        return ps.solve_radial(prep.phi, prep.nl, geo.dimension, geo.radius, geo.right, N=geo.nodes,
                               init=init, **opts)
    prof = _solve_profile(prep)
    a = np.asarray(geo.direction, dtype=float)
    planar = gs.planar_field(prof, a, geo.box, geo.spacing)
    fld = planar
    if geo.kind == "box":
        opts = {k: v for k, v in _solver_settings(prep.scenario).items() if v is not None}
        if geo.bend:
            perp = np.array([-a[1], a[0]])
            t_of = lambda x: a[0] * x[0] + a[1] * x[1] - geo.bend * (perp[0] * x[0] + perp[1] * x[1]) ** 2
            u_at = lambda tt: np.stack([np.interp(tt, prof.t, ui) for ui in prof.u])
            bc = lambda x: u_at(t_of(x))
        else:
            bc = planar
        fld = gs.solve_box(prep.phi, prep.nl, geo.box, geo.spacing, bc, **opts)
    if geo.perturb > 0:
        fld = gs.perturb(fld, geo.perturb, seed=prep.scenario.seed)
    return fld


def save_solution(sol, out_dir):
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    if isinstance(sol, ps.RadialSolution):
        (out / "solution.csv").write_text(ps.profile_to_csv(sol.profile))
        return out / "solution.csv"
    if isinstance(sol, ps.Profile1D):
        (out / "solution.csv").write_text(ps.profile_to_csv(sol))
        return out / "solution.csv"
    gs.save_field(sol, out / "field.bin")
    return out / "field.bin"


def load_solution(prep, out_dir):
    out = Path(out_dir)
    geo = prep.geometry
    if geo.kind in GRID_GEOMETRIES:
        return gs.load_field(out / "field.bin")
    prof = ps.profile_from_csv((out / "solution.csv").read_text(), prep.phi, prep.nl)
    if geo.kind == "radial":
        p = prep.phi.p if prep.phi.kind == pm.P_LAPLACIAN else 2.0
        return ps.RadialSolution(prof, geo.dimension, p)
    return prof


# ---------------------------------------------------------------- diagnostics


@dataclass
class Context:
    prep: Prepared
    solution: object
    report: DiagnosticsReport
    seed: int
    tol_scale: float = 1.0

    @property
    def phi(self):
        return self.prep.phi

    @property
    def nl(self):
        return self.prep.nl

    def tol(self, spec, default):
        base = default if spec.tolerance is None else spec.tolerance
        return base * self.tol_scale


def _expect_violation(check):
    """Negative control: passes iff the underlying violation reaches the tolerance."""
    if not np.isfinite(check.violation):
        return check
    return Check(check.name, check.kind, check.value, check.tolerance - check.violation, 0.0, check.anchor,
                 f"negative control (violation must reach {check.tolerance:.3e}); {check.notes}", check.required)


def diagnose(prep, solution, seed=None, tol_scale=1.0):
    sc = prep.scenario
    seed = sc.seed if seed is None else seed
    report = DiagnosticsReport(title=sc.name)
    report.context = {
        "scenario": sc.name,
        "geometry": prep.geometry.kind,
        "phi": prep.phi.label(),
        "nonlinearity": prep.nl.describe(),
        "seed": seed,
        "tol_scale": tol_scale,
    }
    ctx = Context(prep, solution, report, seed, tol_scale)
    for spec in sc.checks:
        kind = CHECKS[spec.name]
        try:
            checks = kind.fn(ctx, spec)
        except QuasilabError as exc:
            checks = [Check(spec.name, "error", None, float("inf"), ctx.tol(spec, 0.0), ANCHORS.get(spec.name, ""),
                            f"{type(exc).__name__}: {exc}", spec.required)]
        for c in checks:
            c.required = c.required and spec.required
            report.add(_expect_violation(c) if spec.expect == "violation" else c)
    return report
