"""Command-line scenario runner.

Exit codes: 0 all required checks pass, 2 a check failed, 3 solver failure,
4 validation error, 5 parse error.
"""
from __future__ import annotations

import argparse
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime, timezone
import json
from pathlib import Path
import platform
import sys
import time

import numpy as np
import scipy

from . import liouville_bounds as lb
from . import phi_models as pm
from . import scenario as scn
from .errors import QuasilabError, ScenarioParseError, ScenarioValidationError

EXIT_OK = 0
EXIT_CHECK = 2
EXIT_SOLVER = 3
EXIT_VALIDATION = 4
EXIT_PARSE = 5


def _fmt(value):
    return f"{value:.12g}"


# ---------------------------------------------------------------- query


def _query_args(tokens):
    kw = {}
    for tok in tokens:
        if "=" not in tok:
            raise ScenarioParseError(f"expected key=value, got {tok!r}")
        k, v = tok.split("=", 1)
        kw[k.strip()] = v.strip()
    return kw


def _number(kw, key, required=True):
    if key not in kw:
        if required:
            raise ScenarioParseError(f"missing {key}=")
        return None
    try:
        return float(kw[key])
    except ValueError as exc:
        raise ScenarioParseError(f"{key} must be a number, got {kw[key]!r}") from exc


def evaluate_query(expr):
    """Evaluate a one-shot query and return the printed text."""
    tokens = expr.split()
    if not tokens:
        raise ScenarioParseError("empty query")
    head, kw = tokens[0], _query_args(tokens[1:])
    try:
        if head == "alpha_star":
            kind = kw.get("phi")
            if kind is None:
                raise ScenarioParseError("missing phi=")
            model = pm.make_phi(kind, p=_number(kw, "p", False), epsilon=_number(kw, "epsilon", False) or 0.0)
            return _fmt(pm.alpha_star(model))
        if head == "critical_dim":
            return _fmt(lb.critical_dimension(_number(kw, "p")))
        if head == "exponent":
            rep = lb.lower_bound_exponent(_number(kw, "p"), _number(kw, "n"))
            value = 0.0 if abs(rep.exponent) < 1e-12 else rep.exponent
            return f"{_fmt(value)} regime={rep.regime}"
    except ValueError as exc:
        raise ScenarioValidationError(head, str(exc)) from exc
    raise ScenarioParseError(f"unknown query {head!r}; expected alpha_star, critical_dim or exponent")


# ---------------------------------------------------------------- scenario commands


def _meta(args, sc_source, started, elapsed, status):
    return {
        "command": args.command,
        "scenario": sc_source,
        "started": started,
        "elapsed_seconds": round(elapsed, 3),
        "exit_status": status,
        "python": platform.python_version(),
        "numpy": np.__version__,
        "scipy": scipy.__version__,
    }


def _prepare(path):
    sc = scn.load_scenario(path)
    return scn.validate(sc)


def _print_report(report, stream):
    for c in report.checks:
        tag = "PASS" if c.passed else ("FAIL" if c.required else "INFO")
        print(f"{tag} {c.name}: violation {c.violation:.3e} (tolerance {c.tolerance:.3e})", file=stream)


def run_scenario(path, out, command="run", seed=None, tol_scale=1.0, stream=None):
    """Parse, validate, solve and/or diagnose one scenario; returns the exit status."""
    stream = sys.stdout if stream is None else stream
    started = datetime.now(timezone.utc).isoformat()
    t0 = time.perf_counter()
    status = EXIT_OK
    source = str(path)
    out_dir = None
    try:
        prep = _prepare(path)
        source = prep.scenario.source
        out_dir = Path(out) if out else Path("runs") / prep.scenario.name
        out_dir.mkdir(parents=True, exist_ok=True)
        if command in ("solve", "run"):
            sol = scn.solve(prep)
            scn.save_solution(sol, out_dir)
        else:
            try:
                sol = scn.load_solution(prep, out_dir)
            except FileNotFoundError:
                print(f"error: no saved solution in {out_dir}; run 'solve' first", file=sys.stderr)
                return EXIT_SOLVER
        if command in ("diagnose", "run"):
            report = scn.diagnose(prep, sol, seed=seed, tol_scale=tol_scale)
            report.write(out_dir)
            _print_report(report, stream)
            status = EXIT_OK if report.passed else EXIT_CHECK
    except ScenarioParseError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except FileNotFoundError as exc:
        print(f"parse error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    except ScenarioValidationError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except QuasilabError as exc:
        print(f"solver error: {type(exc).__name__}: {exc}", file=sys.stderr)
        status = EXIT_SOLVER
    if out_dir is not None:
        meta = _meta(argparse.Namespace(command=command), source, started, time.perf_counter() - t0, status)
        (out_dir / "run_meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return status


def _batch_one(job):
    path, out, seed, tol_scale = job
    return run_scenario(path, out, "run", seed, tol_scale)


def build_parser():
    parser = argparse.ArgumentParser(prog="quasilab", description="Quasilinear elliptic systems laboratory.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, text in (("solve", "solve a scenario and store the solution"),
                       ("diagnose", "run the checks on a stored solution"),
                       ("run", "solve and run the checks")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--scenario", required=True, help="scenario file or bundled scenario name")
        p.add_argument("--out", help="output directory (default runs/<name>)")
        p.add_argument("--seed", type=int, help="override the scenario seed")
        p.add_argument("--tol-scale", type=float, default=1.0, help="multiply every tolerance")
    q = sub.add_parser("query", help="evaluate a closed-form quantity")
    q.add_argument("expr", nargs="+", help='e.g. "critical_dim p=2" or "exponent p=2 n=10"')
    b = sub.add_parser("batch", help="run several scenarios")
    b.add_argument("scenarios", nargs="*", help="scenario files (default: all bundled)")
    b.add_argument("--out", default="runs", help="parent output directory")
    b.add_argument("--seed", type=int)
    b.add_argument("--tol-scale", type=float, default=1.0)
    b.add_argument("--jobs", type=int, default=1, help="scenarios run concurrently")
    sub.add_parser("list", help="list bundled scenarios")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.command == "query":
        try:
            print(evaluate_query(" ".join(args.expr)))
        except ScenarioParseError as exc:
            print(f"parse error: {exc}", file=sys.stderr)
            return EXIT_PARSE
        except ScenarioValidationError as exc:
            print(f"validation error: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        return EXIT_OK
    if args.command == "list":
        for path in scn.bundled_scenarios():
            print(path.stem)
        return EXIT_OK
    if args.command == "batch":
        paths = args.scenarios or [str(p) for p in scn.bundled_scenarios()]
        jobs = [(p, str(Path(args.out) / Path(p).stem), args.seed, args.tol_scale) for p in paths]
        if args.jobs > 1:
            with ProcessPoolExecutor(max_workers=args.jobs) as pool:
                codes = list(pool.map(_batch_one, jobs))
        else:
            codes = [_batch_one(j) for j in jobs]
        for (p, *_), code in zip(jobs, codes):
            print(f"{Path(p).stem}: exit {code}")
        return max(codes) if codes else EXIT_OK
    if args.tol_scale <= 0:
        print("validation error: --tol-scale must be positive", file=sys.stderr)
        return EXIT_VALIDATION
    return run_scenario(args.scenario, args.out, args.command, args.seed, args.tol_scale)


if __name__ == "__main__":
    sys.exit(main())
