"""Named checks with explicit tolerances, serialisable to JSON and CSV."""
from __future__ import annotations

from dataclasses import dataclass, field
import csv
import json
from pathlib import Path

import numpy as np


@dataclass
class Check:
    """One verdict: passes iff ``violation <= tolerance``.

    ``violation`` is the signed amount by which the property fails (<= 0 when
    it holds exactly). Exploratory checks set ``required = False`` and never
    affect the aggregate verdict.
    """

    name: str
    kind: str
    value: object
    violation: float
    tolerance: float
    anchor: str = ""
    notes: str = ""
    required: bool = True

    @property
    def passed(self):
        return bool(np.isfinite(self.violation) and self.violation <= self.tolerance)

    def as_dict(self):
        return {
            "name": self.name,
            "kind": self.kind,
            "value": _plain(self.value),
            "violation": _plain(self.violation),
            "tolerance": _plain(self.tolerance),
            "passed": self.passed,
            "required": self.required,
            "anchor": self.anchor,
            "notes": self.notes,
        }


@dataclass
class DiagnosticsReport:
    title: str = ""
    checks: list = field(default_factory=list)
    series: dict = field(default_factory=dict)
    context: dict = field(default_factory=dict)

    def add(self, check):
        self.checks.append(check)
        return check

    def add_series(self, name, **columns):
        self.series[name] = {k: np.asarray(v, dtype=float) for k, v in columns.items()}

    @property
    def passed(self):
        return all(c.passed for c in self.checks if c.required)

    def failures(self):
        return [c for c in self.checks if c.required and not c.passed]

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def as_dict(self):
        return {
            "title": self.title,
            "passed": self.passed,
            "context": _plain(self.context),
            "checks": [c.as_dict() for c in self.checks],
            "series": sorted(self.series),
        }

    def to_json(self):
        return json.dumps(self.as_dict(), sort_keys=True, indent=2)

    def write(self, out_dir):
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "report.json").write_text(self.to_json() + "\n")
        for name, cols in self.series.items():
            write_series_csv(out / f"{name}.csv", cols)
        return out / "report.json"


def write_series_csv(path, columns):
    keys = list(columns)
    length = max(len(v) for v in columns.values())
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(keys)
        for k in range(length):
            w.writerow([f"{columns[key][k]:.17g}" if k < len(columns[key]) else "" for key in keys])


def _plain(obj):
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_plain(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if not np.isfinite(v):
            return str(v)
        return float(f"{v:.15g}")
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj
