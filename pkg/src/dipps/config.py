"""JSON scenario configuration files.

A config names where the load comes from (inline values, a profile CSV or a
raw household CSV plus a day), how PV and the tariff are produced, and the
storage and grid parameters. Relative paths resolve against the config
file's directory. See ``data/demo.json`` for a complete example.
"""

from __future__ import annotations

import datetime as dt
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Any

from .data import ColumnSpec, CoverageGap, MissingColumn, ParseError, Unit, load_csv, read_profile_csv, resample_hourly, synth_pv, synth_tariff
from .domain import (
    EfficiencyConvention,
    EssParams,
    MicrogridParams,
    PowerProfile,
    ProfileKind,
    ScenarioError,
    SellWindowMask,
    TariffSchedule,
    TimeGrid,
    default_bonus_weight,
    validate_scenario,
)
from .horizon import Case, ScenarioConfig, TerminalPolicy
from .milp import MilpOptions

SCHEMA = 1


class ConfigError(ValueError):
    """A config problem, naming the field and, when known, the file line."""

    def __init__(self, field: str, message: str, path: str | None = None, line: int | None = None):
        self.field = field
        self.path = path
        self.line = line
        where = path or "<config>"
        if line is not None:
            where += f":{line}"
        super().__init__(f"{where}: {field}: {message}")


@dataclass(frozen=True)
class LoadedConfig:
    base: ScenarioConfig
    cases: tuple[Case, ...]
    bonus_weight: float
    source: str
    doc: dict


def _line_of(text: str, key: str) -> int | None:
    needle = f'"{key}"'
    for i, line in enumerate(text.splitlines(), start=1):
        if needle in line:
            return i
    return None


class _Reader:
    def __init__(self, doc: dict, text: str, path: str | None):
        self.doc = doc
        self.text = text
        self.path = path
        self.base_dir = Path(path).parent if path else Path.cwd()

    def error(self, field: str, message: str) -> ConfigError:
        return ConfigError(field, message, self.path, _line_of(self.text, field.split(".")[-1]))

    def get(self, section: dict, field: str, key: str, kind, default: Any = ..., allow_none: bool = False):
        if key not in section:
            if default is ...:
                raise self.error(field, "required field is missing")
            return default
        value = section[key]
        if value is None and allow_none:
            return None
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if not isinstance(value, kind) or isinstance(value, bool) and kind is not bool:
            raise self.error(field, f"expected {getattr(kind, '__name__', kind)}, got {type(value).__name__}")
        return value

    def section(self, field: str, default: Any = ...) -> dict:
        return self.get(self.doc, field, field, dict, default)

    def path_of(self, value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else self.base_dir / p

    def floats(self, field: str, values) -> tuple[float, ...]:
        if not isinstance(values, list) or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in values):
            raise self.error(field, "expected a list of numbers")
        return tuple(float(v) for v in values)


def _load_profile(r: _Reader, spec: dict, field: str, kind: ProfileKind) -> PowerProfile:
    try:
        return _read_profile(r, spec, field, kind)
    except (ParseError, MissingColumn, CoverageGap, OSError) as exc:
        raise r.error(field, str(exc)) from None


def _read_profile(r: _Reader, spec: dict, field: str, kind: ProfileKind) -> PowerProfile:
    if "values" in spec:
        return PowerProfile(r.floats(f"{field}.values", spec["values"]), kind)
    if "profile_csv" in spec:
        path = r.path_of(r.get(spec, f"{field}.profile_csv", "profile_csv", str))
        return read_profile_csv(path, spec.get("column"), kind)
    if "csv" in spec:
        path = r.path_of(r.get(spec, f"{field}.csv", "csv", str))
        day = dt.date.fromisoformat(r.get(spec, f"{field}.date", "date", str))
        columns = ColumnSpec(
            value=r.get(spec, f"{field}.value_column", "value_column", str, ColumnSpec.value),
            date=r.get(spec, f"{field}.date_column", "date_column", str, ColumnSpec.date),
            time=r.get(spec, f"{field}.time_column", "time_column", str, ColumnSpec.time),
        )
        unit = r.get(spec, f"{field}.unit", "unit", str, Unit.KW.value)
        try:
            unit = Unit(unit)
        except ValueError:
            raise r.error(f"{field}.unit", f"unknown unit {unit!r}") from None
        return resample_hourly(load_csv(path, columns, unit), day, kind)
    raise r.error(field, "needs one of 'values', 'profile_csv' or 'csv'")


def parse_config(text: str, path: str | None = None, overrides: dict | None = None) -> LoadedConfig:
    """Build the base scenario configuration from JSON ``text``.

    ``overrides`` (``window_steps``, ``terminal_policy``, ``gap``,
    ``workers``, ``node_limit``) take precedence over the file.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError("json", exc.msg, path, exc.lineno) from None
    if not isinstance(doc, dict):
        raise ConfigError("json", "top level must be an object", path, 1)
    r = _Reader(doc, text, path)
    schema = r.get(doc, "schema", "schema", int, SCHEMA)
    if schema != SCHEMA:
        raise r.error("schema", f"unsupported schema {schema}")
    overrides = {k: v for k, v in (overrides or {}).items() if v is not None}

    grid = TimeGrid(0, 24, r.get(doc, "dt_hours", "dt_hours", float, 1.0))
    load = _load_profile(r, r.section("load"), "load", ProfileKind.LOAD)

    pv_spec = r.section("pv")
    if "synth" in pv_spec:
        synth = r.get(pv_spec, "pv.synth", "synth", dict)
        ratio = r.get(synth, "pv.synth.energy_ratio", "energy_ratio", float, None, allow_none=True)
        cap = r.get(synth, "pv.synth.capacity_kw", "capacity_kw", float, 1.0)
        energy = None if ratio is None else ratio * sum(load.values) * grid.dt_hours
        pv = synth_pv(cap, grid, energy)
    else:
        pv = _load_profile(r, pv_spec, "pv", ProfileKind.PV)

    tariff_spec = r.section("tariff")
    if "synth" in tariff_spec:
        synth = r.get(tariff_spec, "tariff.synth", "synth", dict)
        tilt = r.get(synth, "tariff.synth.tilt", "tilt", float, 0.0)
        if tilt < 0:
            raise r.error("tariff.synth.tilt", "must be >= 0")
        tariff = synth_tariff(
            grid,
            off_peak=r.get(synth, "tariff.synth.off_peak", "off_peak", float, 0.20),
            peak=r.get(synth, "tariff.synth.peak", "peak", float, 0.26),
            sell_fraction=r.get(synth, "tariff.synth.sell_fraction", "sell_fraction", float, 0.8),
            tilt=tilt,
        )
    else:
        tariff = TariffSchedule(
            r.floats("tariff.buy", tariff_spec.get("buy")),
            r.floats("tariff.sell", tariff_spec.get("sell")),
        )

    e = r.section("ess")
    cap = r.get(e, "ess.capacity_kwh", "capacity_kwh", float)
    ess = EssParams(
        capacity_kwh=cap,
        eta_c=r.get(e, "ess.eta_c", "eta_c", float, 0.95),
        eta_d=r.get(e, "ess.eta_d", "eta_d", float, 0.95),
        soc_min=r.get(e, "ess.soc_min", "soc_min", float, 0.2),
        soc_max=r.get(e, "ess.soc_max", "soc_max", float, 0.8),
        soc_initial=r.get(e, "ess.soc_initial", "soc_initial", float, 0.5),
        soc_final_target=r.get(e, "ess.soc_final_target", "soc_final_target", float, 0.5),
        p_charge_max_kw=r.get(e, "ess.p_charge_max_kw", "p_charge_max_kw", float, None, allow_none=True),
        p_discharge_max_kw=r.get(e, "ess.p_discharge_max_kw", "p_discharge_max_kw", float, None, allow_none=True),
    )
    grid_limit = r.get(doc, "grid_limit_kw", "grid_limit_kw", float, None, allow_none=True)
    if grid_limit is None:
        grid_limit = MicrogridParams.default_grid_limit(load.values, pv.values)
    conv = r.get(doc, "efficiency_convention", "efficiency_convention", str, "paper")
    try:
        conv = EfficiencyConvention(conv)
    except ValueError:
        raise r.error("efficiency_convention", f"expected 'paper' or 'physical', got {conv!r}") from None
    params = MicrogridParams(ess, max(pv.values, default=0.0), grid_limit, conv)

    bonus = r.get(doc, "bonus_weight", "bonus_weight", float, None, allow_none=True)
    try:
        scenario = validate_scenario(params, grid, load, pv, tariff, SellWindowMask.zeros(grid.steps, bonus or 0.0))
    except ScenarioError as exc:
        first = exc.issues[0].field
        err = r.error(first, str(exc))
        err.issues = exc.issues
        raise err from None
    if bonus is None:
        bonus = default_bonus_weight(tariff)

    n_p = overrides.get("window_steps", r.get(doc, "window_steps", "window_steps", int, 6))
    if n_p < 1:
        raise r.error("window_steps", "must be >= 1")
    policy = overrides.get("terminal_policy", r.get(doc, "terminal_policy", "terminal_policy", str, "EveryWindow"))
    try:
        policy = TerminalPolicy(policy)
    except ValueError:
        raise r.error("terminal_policy", f"expected DayEnd or EveryWindow, got {policy!r}") from None
    cases = r.get(doc, "cases", "cases", list, ["A", "B", "C"])
    try:
        cases = tuple(Case(c) for c in cases)
    except ValueError:
        raise r.error("cases", f"entries must be A, B or C, got {cases!r}") from None

    milp = MilpOptions(
        gap=float(overrides.get("gap", 1e-6)),
        node_limit=int(overrides.get("node_limit", 1_000_000)),
        workers=int(overrides.get("workers", 1)),
    )
    base = ScenarioConfig(scenario, window_steps=n_p, terminal_policy=policy, milp=milp)
    return LoadedConfig(base, cases, float(bonus), path or "<string>", doc)


def load_config(path: str | Path, overrides: dict | None = None) -> LoadedConfig:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError("config", exc.strerror or str(exc), str(path)) from None
    return parse_config(text, str(path), overrides)
