import json

import pytest

from dipps.config import ConfigError, load_config, parse_config
from dipps.data import demo_path
from dipps.horizon import Case, TerminalPolicy


def _demo_doc() -> dict:
    doc = json.loads(demo_path("demo.json").read_text())
    doc["load"]["csv"] = str(demo_path("demo_load.csv"))
    return doc


def _parse(doc: dict, **overrides):
    return parse_config(json.dumps(doc, indent=2), "cfg.json", overrides)


def test_demo_config_loads(demo):
    sc = demo.base.scenario
    assert demo.cases == (Case.A, Case.B, Case.C)
    assert demo.base.window_steps == 6
    assert demo.base.terminal_policy is TerminalPolicy.EVERY_WINDOW
    assert demo.bonus_weight == 0.05
    assert sc.ess.capacity_kwh == 12.0
    assert sc.params.grid_limit_kw == 2.5
    assert sum(sc.pv) == pytest.approx(1.35 * sum(sc.load), abs=1e-9)


def test_overrides_take_precedence():
    cfg = _parse(_demo_doc(), window_steps=4, terminal_policy="DayEnd", gap=1e-3, workers=2, node_limit=10)
    assert cfg.base.window_steps == 4
    assert cfg.base.terminal_policy is TerminalPolicy.DAY_END
    assert (cfg.base.milp.gap, cfg.base.milp.workers, cfg.base.milp.node_limit) == (1e-3, 2, 10)


def test_inline_values():
    doc = {
        "load": {"values": [1.0] * 24},
        "pv": {"values": [0.0] * 24},
        "tariff": {"buy": [0.2] * 24, "sell": [0.1] * 24},
        "ess": {"capacity_kwh": 5},
    }
    cfg = _parse(doc)
    assert cfg.base.scenario.params.grid_limit_kw == 2.0
    assert cfg.bonus_weight == pytest.approx(1.1)


def test_missing_field_named_with_line():
    doc = _demo_doc()
    del doc["ess"]["capacity_kwh"]
    doc["ess"]["eta_c"] = 0.9
    with pytest.raises(ConfigError) as info:
        _parse(doc)
    assert info.value.field == "ess.capacity_kwh"
    assert "cfg.json" in str(info.value)


def test_wrong_type_names_field_and_line():
    doc = _demo_doc()
    doc["window_steps"] = "six"
    text = json.dumps(doc, indent=2)
    with pytest.raises(ConfigError) as info:
        parse_config(text, "cfg.json")
    assert info.value.field == "window_steps"
    assert text.splitlines()[info.value.line - 1].strip().startswith('"window_steps"')


def test_invalid_json_line():
    with pytest.raises(ConfigError) as info:
        parse_config('{\n  "load": {\n  oops\n}', "cfg.json")
    assert info.value.field == "json"
    assert info.value.line == 3


@pytest.mark.parametrize(
    "path, value, field",
    [
        (("terminal_policy",), "Sometimes", "terminal_policy"),
        (("cases",), ["A", "D"], "cases"),
        (("efficiency_convention",), "magic", "efficiency_convention"),
        (("tariff", "synth", "tilt"), -1.0, "tariff.synth.tilt"),
        (("window_steps",), 0, "window_steps"),
        (("schema",), 2, "schema"),
        (("ess", "soc_min"), 0.9, "soc_min"),
    ],
)
def test_bad_values_name_field(path, value, field):
    doc = _demo_doc()
    node = doc
    for key in path[:-1]:
        node = node[key]
    node[path[-1]] = value
    with pytest.raises(ConfigError) as info:
        _parse(doc)
    assert info.value.field == field


def test_missing_file(tmp_path):
    with pytest.raises(ConfigError) as info:
        load_config(tmp_path / "nope.json")
    assert info.value.field == "config"


def test_relative_csv_resolves_against_config(tmp_path):
    doc = json.loads(demo_path("demo.json").read_text())
    (tmp_path / "demo_load.csv").write_text(demo_path("demo_load.csv").read_text())
    (tmp_path / "c.json").write_text(json.dumps(doc))
    cfg = load_config(tmp_path / "c.json")
    assert sum(cfg.base.scenario.load) == pytest.approx(18.65)
