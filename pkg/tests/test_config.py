import json

import pytest

from fracdiff.config import ConfigError, DEFAULTS, load_config, load_schema, parse_config

BASE = {
    "problem": {
        "a": 0.0,
        "T": 1.0,
        "k": 16,
        "L": 8.0,
        "Nx": 16,
        "alpha": 0.5,
        "kernel": {"sigma": 1.0, "mode": "full"},
    }
}


def text(obj):
    return json.dumps(obj, indent=2)


def variant(**problem):
    d = json.loads(json.dumps(BASE))
    d["problem"].update(problem)
    return d


def test_defaults_filled():
    cfg = parse_config(text(BASE))
    assert cfg.diagnostics == DEFAULTS["diagnostics"]
    assert cfg.tolerances["residual"] == 1e-10
    assert cfg.problem["f"] == {"name": "zero"} and cfg.problem["w0"] == {"name": "zero"}
    assert cfg.seed == 0 and cfg.threads == 1
    assert cfg.echo() == cfg.raw and cfg.echo() is not cfg.raw


def test_alpha_out_of_range_names_field_and_line():
    with pytest.raises(ConfigError) as exc:
        parse_config(text(variant(alpha=1.5)), "run.json")
    msg = exc.value.messages[0]
    assert msg.startswith("run.json:8: problem.alpha:")


def test_unknown_key_is_error():
    d = variant()
    d["problem"]["kernel"]["colour"] = "red"
    with pytest.raises(ConfigError) as exc:
        parse_config(text(d), "c.json")
    assert any("problem.kernel.colour: unknown key" in m for m in exc.value.messages)


def test_invalid_json_reports_line():
    with pytest.raises(ConfigError) as exc:
        parse_config('{\n  "problem": {\n   "a": 0,,\n }', "bad.json")
    assert exc.value.messages[0].startswith("bad.json:3:")


@pytest.mark.parametrize(
    "change,fragment",
    [
        ({"T": -1.0}, "must exceed"),
        ({"kernel": {"sigma": 1.0, "mode": "tabulated"}}, "needs a table"),
        ({"kernel": {"sigma": 1.0, "mode": "tabulated", "table": [[1, 2], [3, 1]]}}, "symmetric"),
        ({"kernel": {"sigma": 1.0, "mode": "truncated", "radius": 5.0}}, "half the torus"),
        ({"kernel": {"sigma": 1.0, "lam": 2.0, "mode": "full",
                     "multiplier": {"name": "oscillating", "mean": 1.0, "amplitude": 0.9, "frequency": 1.0}}},
         "leaves [1/lam, lam]"),
        ({"w0": {"name": "eigenmode", "mood": 1}}, "unknown parameter"),
        ({"f": {"name": "nonsense"}}, "problem.f"),
    ],
)
def test_semantic_errors(change, fragment):
    with pytest.raises(ConfigError) as exc:
        parse_config(text(variant(**change)))
    assert any(fragment in m for m in exc.value.messages), exc.value.messages


def test_ladder_must_be_sorted():
    d = variant()
    d["ladder"] = [[64, 32], [32, 16]]
    with pytest.raises(ConfigError):
        parse_config(text(d))


def test_schema_is_shipped_and_strict():
    s = load_schema()
    assert s["additionalProperties"] is False
    assert "problem" in s["required"]


def test_load_config_missing_file(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "nope.json")


def test_shipped_example_configs_parse():
    import pathlib

    root = pathlib.Path(__file__).resolve().parent.parent / "configs"
    files = sorted(root.glob("*.json"))
    assert files
    for f in files:
        load_config(f)
