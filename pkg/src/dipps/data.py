"""Profile ingestion, resampling and synthetic PV/tariff shapes.

Load CSVs follow the household power consumption layout (``Date;Time;
Global_active_power;...`` with ``?`` for missing readings) but column names,
delimiter and units are configurable.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import json
import math
import os
import tempfile
from dataclasses import dataclass
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Sequence

import numpy as np

from .domain import (
    EssParams,
    MicrogridParams,
    PowerProfile,
    ProfileKind,
    Scenario,
    SellWindowMask,
    TariffSchedule,
    TimeGrid,
    validate_scenario,
)

MISSING_MARKERS = ("?", "")
SEED_ENV = "DIPPS_SEED"


class Unit(str, Enum):
    KW = "kW"
    W = "W"
    KWH_PER_INTERVAL = "kWh-per-interval"


class ParseError(ValueError):
    def __init__(self, line: int, message: str):
        self.line = line
        super().__init__(f"line {line}: {message}")


class MissingColumn(KeyError):
    def __init__(self, column: str):
        self.column = column
        super().__init__(column)

    def __str__(self) -> str:
        return f"missing column {self.column!r}"


class CoverageGap(ValueError):
    def __init__(self, hour: int):
        self.hour = hour
        super().__init__(f"no samples in hour {hour}")


@dataclass(frozen=True)
class RawSeries:
    timestamps: tuple[dt.datetime, ...]
    values: tuple[float, ...]
    unit: Unit = Unit.KW
    dropped_count: int = 0

    def __post_init__(self):
        if len(self.timestamps) != len(self.values):
            raise ValueError("timestamps and values differ in length")
        for a, b in zip(self.timestamps, self.timestamps[1:]):
            if not b > a:
                raise ValueError(f"timestamps not strictly increasing at {b}")

    def __len__(self) -> int:
        return len(self.values)


@dataclass(frozen=True)
class ColumnSpec:
    value: str = "Global_active_power"
    date: str | None = "Date"
    time: str | None = "Time"
    timestamp: str | None = None  # single ISO column instead of date + time
    date_format: str = "%d/%m/%Y"
    time_format: str = "%H:%M:%S"


def _sniff_delimiter(header: str) -> str:
    return ";" if header.count(";") > header.count(",") else ","


def load_csv(path: str | os.PathLike, columns: ColumnSpec = ColumnSpec(), unit: Unit | str = Unit.KW) -> RawSeries:
    """Parse a delimited text file into a :class:`RawSeries`.

    Rows whose value is a missing marker (``?`` or empty) are dropped and
    counted. Raises :class:`MissingColumn` for an absent declared column and
    :class:`ParseError` (with the 1-based line number) for malformed rows.
    """
    unit = Unit(unit)
    text = Path(path).read_text()
    lines = text.splitlines()
    if not lines:
        raise ParseError(1, "empty file")
    reader = csv.reader(lines, delimiter=_sniff_delimiter(lines[0]))
    header = [h.strip() for h in next(reader)]
    wanted = [columns.value] + ([columns.timestamp] if columns.timestamp else [columns.date, columns.time])
    for name in wanted:
        if name not in header:
            raise MissingColumn(name)
    col = {name: header.index(name) for name in wanted}

    stamps, values = [], []
    dropped = 0
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) < len(header):
            raise ParseError(lineno, f"expected {len(header)} fields, got {len(row)}")
        raw = row[col[columns.value]].strip()
        if raw in MISSING_MARKERS:
            dropped += 1
            continue
        try:
            value = float(raw)
            if columns.timestamp:
                stamp = dt.datetime.fromisoformat(row[col[columns.timestamp]].strip())
            else:
                d = dt.datetime.strptime(row[col[columns.date]].strip(), columns.date_format).date()
                t = dt.datetime.strptime(row[col[columns.time]].strip(), columns.time_format).time()
                stamp = dt.datetime.combine(d, t)
        except ValueError as exc:
            raise ParseError(lineno, str(exc)) from None
        if not math.isfinite(value):
            raise ParseError(lineno, f"non-finite value {raw!r}")
        if stamps and not stamp > stamps[-1]:
            raise ParseError(lineno, f"timestamp {stamp} not after {stamps[-1]}")
        stamps.append(stamp)
        values.append(value)
    return RawSeries(tuple(stamps), tuple(values), unit, dropped)


def _interval_hours(series: RawSeries) -> np.ndarray:
    """Length of the interval each sample closes, in hours.

    The first sample reuses the following spacing.
    """
    t = np.array([s.timestamp() for s in series.timestamps])
    if t.size < 2:
        raise ValueError("kWh-per-interval data needs at least two samples")
    d = np.diff(t) / 3600.0
    return np.concatenate([d[:1], d])


def resample_hourly(series: RawSeries, day: dt.date, kind: ProfileKind = ProfileKind.LOAD) -> PowerProfile:
    """Mean power (kW) in each hour of ``day``.

    W are divided by 1000; kWh-per-interval readings become mean kW over
    their interval before bucketing. Raises :class:`CoverageGap` for the
    first hour without samples.
    """
    values = np.asarray(series.values, dtype=float)
    if series.unit is Unit.W:
        values = values / 1000.0
    elif series.unit is Unit.KWH_PER_INTERVAL:
        values = values / _interval_hours(series)
    sums = np.zeros(24)
    counts = np.zeros(24, dtype=int)
    for stamp, v in zip(series.timestamps, values):
        if stamp.date() == day:
            sums[stamp.hour] += v
            counts[stamp.hour] += 1
    for h in range(24):
        if counts[h] == 0:
            raise CoverageGap(h)
    return PowerProfile(tuple(sums / counts), kind)


def synth_pv(
    capacity_kw: float,
    grid: TimeGrid = TimeGrid(),
    daily_energy_kwh: float | None = None,
    sunrise: float = 6.0,
    sunset: float = 18.0,
) -> PowerProfile:
    """Half-sine PV shape, zero outside ``[sunrise, sunset]`` and peaking at noon.

    Each step takes the sine at its midpoint. If ``daily_energy_kwh`` is
    given the profile is scaled so that ``sum(values) * dt`` equals it;
    otherwise the peak equals ``capacity_kw``.
    """
    dt_h = grid.dt_hours
    mid = grid.start_hour + (np.arange(grid.steps) + 0.5) * dt_h
    phase = (mid - sunrise) / (sunset - sunrise)
    shape = np.where((phase > 0) & (phase < 1), np.sin(np.pi * np.clip(phase, 0, 1)), 0.0)
    if daily_energy_kwh is None:
        values = capacity_kw * shape
    else:
        total = shape.sum() * dt_h
        values = shape * (daily_energy_kwh / total) if total > 0 else shape
    return PowerProfile(tuple(float(v) for v in values), ProfileKind.PV)


def synth_tariff(
    grid: TimeGrid = TimeGrid(),
    off_peak: float = 0.20,
    peak: float = 0.26,
    peak_hours: tuple[float, float] = (13.0, 19.0),
    sell_fraction: float = 0.8,
    tilt: float = 0.0,
) -> TariffSchedule:
    """Two-level time-of-use tariff with the peak buy price on ``peak_hours``.

    The sell price is ``sell_fraction`` times the buy price at every step.
    A positive ``tilt`` scales each price by ``1 + tilt * hour``, so later
    hours within a level are strictly dearer. That removes the exact price
    ties that otherwise leave the timing of a sale arbitrary.
    """
    if tilt < 0:
        raise ValueError("tilt must be >= 0")
    hours = grid.start_hour + np.arange(grid.steps) * grid.dt_hours
    lo, hi = peak_hours
    buy = np.where((hours >= lo) & (hours < hi), peak, off_peak) * (1.0 + tilt * hours)
    return TariffSchedule(tuple(buy.tolist()), tuple((buy * sell_fraction).tolist()))


def _atomic_write(path: str | os.PathLike, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_text_atomic(path: str | os.PathLike, text: str) -> None:
    _atomic_write(path, text)


def profiles_to_csv(columns: dict[str, Sequence[float]]) -> str:
    """CSV text with a ``step`` column followed by ``columns`` in order.

    Floats are written with ``repr`` so reloading is bit-exact.
    """
    names = list(columns)
    n = len(next(iter(columns.values()))) if columns else 0
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["step", *names])
    for k in range(n):
        w.writerow([k, *(repr(float(columns[c][k])) for c in names)])
    return buf.getvalue()


def write_profile_csv(path: str | os.PathLike, profile: PowerProfile, name: str | None = None) -> None:
    _atomic_write(path, profiles_to_csv({name or profile.kind.value: profile.values}))


def read_profile_csv(path: str | os.PathLike, column: str | None = None, kind: ProfileKind | None = None) -> PowerProfile:
    """Read a profile written by :func:`write_profile_csv` (or any ``step,<name>`` CSV)."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ParseError(1, "empty file")
    header = rows[0]
    name = column or header[-1]
    if name not in header:
        raise MissingColumn(name)
    j = header.index(name)
    values = []
    for lineno, row in enumerate(rows[1:], start=2):
        try:
            values.append(float(row[j]))
        except (ValueError, IndexError) as exc:
            raise ParseError(lineno, str(exc)) from None
    if kind is None:
        kind = ProfileKind.PV if name == ProfileKind.PV.value else ProfileKind.LOAD
    return PowerProfile(tuple(values), kind)


def write_profile_json(path: str | os.PathLike, profile: PowerProfile) -> None:
    _atomic_write(path, json.dumps({"schema": 1, "kind": profile.kind.value, "values": list(profile.values)}, indent=2))


def read_profile_json(path: str | os.PathLike) -> PowerProfile:
    doc = json.loads(Path(path).read_text())
    return PowerProfile(tuple(float(v) for v in doc["values"]), ProfileKind(doc["kind"]))


def demo_path(name: str) -> Path:
    """Path of a bundled demo file (``demo_load.csv``, ``demo.json``)."""
    return Path(str(resources.files("dipps") / "data" / name))


def env_seed(default: int = 0) -> int:
    """Seed for randomized test scenarios, taken from ``DIPPS_SEED`` when set."""
    raw = os.environ.get(SEED_ENV, "").strip()
    return int(raw) if raw else default


def random_scenario(rng: np.random.Generator, steps: int, bonus_weight: float = 0.1) -> Scenario:
    """A small random but valid scenario for property and exactness checks.

    Loads and PV are zero at some steps, the mask is random and the grid
    limit is the default, so every window has a feasible schedule.
    """
    load = rng.uniform(0, 3, steps) * (rng.random(steps) < 0.8)
    pv = rng.uniform(0, 4, steps) * (rng.random(steps) < 0.6)
    buy = rng.uniform(0.1, 0.3, steps)
    sell = rng.uniform(0.05, 0.1, steps)
    ess = EssParams.paper_defaults(float(rng.uniform(2, 15)))
    params = MicrogridParams(ess, float(pv.max()), MicrogridParams.default_grid_limit(load, pv))
    mask = SellWindowMask(tuple(int(v) for v in rng.integers(0, 2, steps)), bonus_weight)
    return validate_scenario(
        params,
        TimeGrid(0, steps, 1.0),
        PowerProfile(tuple(load.tolist())),
        PowerProfile(tuple(pv.tolist()), ProfileKind.PV),
        TariffSchedule(tuple(buy.tolist()), tuple(sell.tolist())),
        mask,
    )
