"""Report documents: a JSON object per command plus plot-ready CSV tables."""

import json
import math
import os
from dataclasses import dataclass, field

import numpy as np

REPORT_VERSION = 1


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        if math.isnan(v):
            return "nan"
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


@dataclass
class Check:
    name: str
    passed: bool
    measured: object
    threshold: object
    note: str = ""
    skipped: bool = False

    @property
    def status(self):
        if self.skipped:
            return "skip"
        return "pass" if self.passed else "fail"

    def as_dict(self):
        d = {"name": self.name, "status": self.status, "measured": self.measured, "threshold": self.threshold}
        if self.note:
            d["note"] = self.note
        return d


@dataclass
class ReportDocument:
    command: str
    config: dict
    threads: int = 1
    checks: list = field(default_factory=list)
    artifacts: list = field(default_factory=list)
    data: dict = field(default_factory=dict)

    def add(self, name, passed, measured, threshold, note=""):
        c = Check(name, bool(passed), measured, threshold, note)
        self.checks.append(c)
        return c

    def skip(self, name, note):
        c = Check(name, True, None, None, note, skipped=True)
        self.checks.append(c)
        return c

    @property
    def ok(self):
        return all(c.passed for c in self.checks)

    def as_dict(self):
        return _clean(
            {
                "report_version": REPORT_VERSION,
                "command": self.command,
                "config": self.config,
                "threads": self.threads,
                "checks": [c.as_dict() for c in self.checks],
                "artifacts": list(self.artifacts),
                "data": self.data,
                "status": "pass" if self.ok else "fail",
            }
        )

    def dumps(self):
        return json.dumps(self.as_dict(), sort_keys=True, indent=2) + "\n"

    def write(self, directory, name="report.json"):
        path = os.path.join(directory, name)
        with open(path, "w") as fh:
            fh.write(self.dumps())
        return path


def write_csv(path, header, rows, version_line=None):
    with open(path, "w") as fh:
        if version_line:
            fh.write(version_line + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(repr(float(v)) if isinstance(v, (float, np.floating)) else str(v) for v in row) + "\n")
    return path
