"""Run configuration: JSON text checked against the shipped schema.

Errors carry the line of the offending key, found by composing the same
text as a YAML node graph (JSON is a YAML subset), so messages read
``run.json:7: problem.alpha: 1.5 is greater than or equal to the maximum of 1``.
"""

import copy
import json
import math
from dataclasses import dataclass, field
from importlib import resources

import jsonschema
import yaml

from . import problems

DEFAULTS = {
    "diagnostics": {
        "lambda": 0.1,
        "mu": 0.1,
        "gamma": 0.5,
        "kappa0": 1e-3,
        "lambda_star": 0.2,
        "depth": 4,
        "beta_target": 0.0,
        "h_steps": 4,
        "k_max": 6,
        "energy_trials": 50,
    },
    "tolerances": {
        "residual": 1e-10,
        "maxprinciple": 1e-10,
        "energy": 1e-10,
        "oracle": 0.05,
        "weak_relative": 0.05,
        "weak_ratio": 1.4,
        "uniqueness": 1e-12,
    },
    "seed": 0,
    "threads": 1,
}


class ConfigError(ValueError):
    def __init__(self, messages):
        self.messages = list(messages)
        super().__init__("\n".join(self.messages))


def load_schema():
    text = resources.files("fracdiff").joinpath("schema/config.schema.json").read_text()
    return json.loads(text)


def _line_index(text):
    """Map key paths (tuples) to 1-based line numbers."""
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return {}
    out = {}

    def walk(node, path):
        out[path] = node.start_mark.line + 1
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                key = k.value
                out[path + (key,)] = k.start_mark.line + 1
                walk_child(v, path + (key,))
        elif isinstance(node, yaml.SequenceNode):
            for i, v in enumerate(node.value):
                walk_child(v, path + (i,))

    def walk_child(node, path):
        line = out.get(path)
        walk(node, path)
        if line is not None:
            out[path] = line

    walk(root, ())
    return out


def _fmt_path(path):
    parts = []
    for p in path:
        if isinstance(p, int):
            parts.append(f"[{p}]")
        else:
            parts.append(("." if parts else "") + str(p))
    return "".join(parts) or "<root>"


def _locate(lines, path):
    path = tuple(path)
    while path and path not in lines:
        path = path[:-1]
    return lines.get(path, 1)


@dataclass
class RunConfig:
    raw: dict
    source: str = "<config>"
    problem: dict = field(init=False)
    diagnostics: dict = field(init=False)
    tolerances: dict = field(init=False)

    def __post_init__(self):
        self.problem = self.raw["problem"]
        self.diagnostics = self.raw["diagnostics"]
        self.tolerances = self.raw["tolerances"]

    @property
    def seed(self):
        return self.raw["seed"]

    @property
    def threads(self):
        return self.raw["threads"]

    @property
    def ladder(self):
        return [tuple(r) for r in self.raw.get("ladder", [])]

    @property
    def output(self):
        return self.raw.get("output")

    def echo(self):
        return copy.deepcopy(self.raw)


def parse_config(text, source="<config>"):
    """Parse and validate configuration text; raises :class:`ConfigError`."""
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError([f"{source}:{exc.lineno}: invalid JSON: {exc.msg}"]) from exc
    lines = _line_index(text)
    schema = load_schema()
    validator = jsonschema.Draft202012Validator(schema)
    msgs = []
    for err in sorted(validator.iter_errors(data), key=lambda e: list(map(str, e.absolute_path))):
        path = list(err.absolute_path)
        if err.validator == "additionalProperties":
            allowed = set(err.schema.get("properties", {}))
            for key in sorted(set(err.instance) - allowed):
                p = path + [key]
                msgs.append(f"{source}:{_locate(lines, p)}: {_fmt_path(p)}: unknown key")
            continue
        msgs.append(f"{source}:{_locate(lines, path)}: {_fmt_path(path)}: {err.message}")
    if msgs:
        raise ConfigError(msgs)
    msgs = _semantic_checks(data, source, lines)
    if msgs:
        raise ConfigError(msgs)
    merged = copy.deepcopy(data)
    for key, default in DEFAULTS.items():
        if isinstance(default, dict):
            merged[key] = {**default, **data.get(key, {})}
        else:
            merged.setdefault(key, default)
    merged["problem"].setdefault("f", {"name": "zero"})
    merged["problem"].setdefault("w0", {"name": "zero"})
    return RunConfig(merged, source)


def _semantic_checks(data, source, lines):
    msgs = []

    def bad(path, text):
        msgs.append(f"{source}:{_locate(lines, path)}: {_fmt_path(path)}: {text}")

    pr = data["problem"]
    for key in ("a", "T", "L", "alpha"):
        if not math.isfinite(pr[key]):
            bad(["problem", key], "must be finite")
    if not pr["T"] > pr["a"]:
        bad(["problem", "T"], f"T={pr['T']} must exceed a={pr['a']}")
    kern = pr["kernel"]
    lam = kern.get("lam", 1.0)
    if kern["mode"] == "tabulated":
        tab = kern.get("table")
        if tab is None:
            bad(["problem", "kernel", "mode"], "tabulated mode needs a table")
        elif any(len(row) != len(tab) for row in tab):
            bad(["problem", "kernel", "table"], "table must be square")
        elif any(tab[i][j] != tab[j][i] for i in range(len(tab)) for j in range(len(tab))):
            bad(["problem", "kernel", "table"], "table must be symmetric")
    elif "table" in kern:
        bad(["problem", "kernel", "table"], f"a table is only used by the tabulated mode, not {kern['mode']!r}")
    if kern["mode"] == "truncated" and kern.get("radius", 3.0) > pr["L"] / 2:
        bad(["problem", "kernel", "radius"], "truncation radius exceeds half the torus length")
    if "multiplier" in kern:
        try:
            problems.make_multiplier(kern["multiplier"])
            lo, hi = problems.multiplier_range(kern["multiplier"])
            if lo < 1.0 / lam - 1e-12 or hi > lam + 1e-12:
                bad(["problem", "kernel", "multiplier"], f"range [{lo}, {hi}] leaves [1/lam, lam] = [{1 / lam}, {lam}]")
        except (ValueError, KeyError, TypeError) as exc:
            bad(["problem", "kernel", "multiplier"], str(exc))
    for key, maker in (("f", lambda d: problems.make_forcing(d, pr["L"])), ("w0", None)):
        if key not in pr:
            continue
        desc = pr[key]
        try:
            if maker is not None:
                maker(desc)
            else:
                name = desc.get("name")
                fn, req, opt = problems.INITIAL[name]
                missing = [r for r in req if r not in desc]
                extra = set(desc) - set(req) - set(opt) - {"name"}
                if missing:
                    raise ValueError(f"{name!r} needs parameter(s) {', '.join(missing)}")
                if extra:
                    raise ValueError(f"unknown parameter(s) for {name!r}: {', '.join(sorted(extra))}")
        except (ValueError, KeyError, TypeError) as exc:
            bad(["problem", key], str(exc))
    for i, rung in enumerate(data.get("ladder", [])):
        if i and (rung[0] < data["ladder"][i - 1][0] or rung[1] < data["ladder"][i - 1][1]):
            bad(["ladder", i], "ladder must be sorted by refinement")
    return msgs


def load_config(path):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError([f"{path}: cannot read config ({exc.strerror})"]) from exc
    return parse_config(text, str(path))
