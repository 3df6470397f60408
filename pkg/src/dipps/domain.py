"""Core data types shared by the scheduling engine.

Units: power in kW, energy in kWh, prices in currency/kWh, time in hours.
State of charge (SoC) is a fraction of the storage capacity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

HOURS_PER_DAY = 24.0


class ProfileKind(str, Enum):
    LOAD = "load"
    PV = "pv"


class Objective(str, Enum):
    STATIC = "static"
    DYNAMIC = "dynamic"


class EfficiencyConvention(str, Enum):
    # "paper": discharge drains eta_d * P; "physical": discharge drains P / eta_d
    PAPER = "paper"
    PHYSICAL = "physical"


@dataclass(frozen=True)
class Issue:
    """One validation failure: ``kind`` is ``LengthMismatch`` or ``InvariantViolation``."""

    kind: str
    field: str
    message: str

    def __str__(self) -> str:
        return f"{self.kind}({self.field!r}): {self.message}"


class ScenarioError(ValueError):
    """Raised when a scenario fails validation; carries every issue found."""

    def __init__(self, issues: Sequence[Issue]):
        self.issues = list(issues)
        super().__init__("; ".join(str(i) for i in self.issues))


@dataclass(frozen=True)
class TimeGrid:
    start_hour: int = 0
    steps: int = 24
    dt_hours: float = 1.0

    @property
    def end_hour(self) -> float:
        return self.start_hour + self.steps * self.dt_hours


@dataclass(frozen=True)
class PowerProfile:
    values: tuple[float, ...]
    kind: ProfileKind = ProfileKind.LOAD

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))

    def __len__(self) -> int:
        return len(self.values)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.values, dtype=float)


@dataclass(frozen=True)
class TariffSchedule:
    buy_price: tuple[float, ...]
    sell_price: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "buy_price", tuple(float(v) for v in self.buy_price))
        object.__setattr__(self, "sell_price", tuple(float(v) for v in self.sell_price))


@dataclass(frozen=True)
class EssParams:
    capacity_kwh: float
    eta_c: float = 0.95
    eta_d: float = 0.95
    soc_min: float = 0.2
    soc_max: float = 0.8
    soc_initial: float = 0.5
    soc_final_target: float = 0.5
    p_charge_max_kw: float | None = None
    p_discharge_max_kw: float | None = None

    def __post_init__(self):
        # unspecified power limits take the 40 % / 20 % of capacity rule
        if self.p_charge_max_kw is None:
            object.__setattr__(self, "p_charge_max_kw", 0.4 * self.capacity_kwh)
        if self.p_discharge_max_kw is None:
            object.__setattr__(self, "p_discharge_max_kw", 0.2 * self.capacity_kwh)

    @classmethod
    def paper_defaults(cls, capacity_kwh: float, eta_c: float = 0.95, eta_d: float = 0.95) -> "EssParams":
        return cls(
            capacity_kwh=capacity_kwh,
            eta_c=eta_c,
            eta_d=eta_d,
            soc_min=0.2,
            soc_max=0.8,
            soc_initial=0.5,
            soc_final_target=0.5,
            p_charge_max_kw=0.4 * capacity_kwh,
            p_discharge_max_kw=0.2 * capacity_kwh,
        )


@dataclass(frozen=True)
class MicrogridParams:
    ess: EssParams
    pv_capacity_kw: float
    grid_limit_kw: float
    efficiency_convention: EfficiencyConvention = EfficiencyConvention.PAPER

    @staticmethod
    def default_grid_limit(load: Sequence[float], pv: Sequence[float]) -> float:
        return 2.0 * max(max(load, default=0.0), max(pv, default=0.0), 0.0) or 1.0


@dataclass(frozen=True)
class SellWindowMask:
    mask: tuple[int, ...]
    bonus_weight: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "mask", tuple(int(v) for v in self.mask))

    @classmethod
    def zeros(cls, steps: int, bonus_weight: float = 0.0) -> "SellWindowMask":
        return cls((0,) * steps, bonus_weight)


def default_bonus_weight(tariff: TariffSchedule) -> float:
    """Sell bonus large enough to outweigh any tariff revenue difference."""
    return 1.0 + max(tariff.sell_price, default=0.0)


@dataclass(frozen=True)
class DispatchStep:
    p_g_l: float = 0.0
    p_g_es: float = 0.0
    p_es_l: float = 0.0
    p_es_g: float = 0.0
    p_pv_g: float = 0.0
    p_pv_es: float = 0.0
    p_pv_l: float = 0.0
    b_v: int = 0
    b_g: int = 0
    b_c: int = 0
    soc_next: float = 0.0

    FLOWS = ("p_g_l", "p_g_es", "p_es_l", "p_es_g", "p_pv_g", "p_pv_es", "p_pv_l")
    BINARIES = ("b_v", "b_g", "b_c")

    @property
    def grid_buy(self) -> float:
        """Power bought from the grid (load supply plus grid charging)."""
        return self.p_g_es + self.p_g_l

    @property
    def grid_sell(self) -> float:
        """Power sold to the grid (storage discharge plus PV export)."""
        return self.p_es_g + self.p_pv_g

    @property
    def charge(self) -> float:
        return self.p_g_es + self.p_pv_es

    @property
    def discharge(self) -> float:
        return self.p_es_g + self.p_es_l


@dataclass(frozen=True)
class DispatchSchedule:
    steps: tuple[DispatchStep, ...]
    soc_trajectory: tuple[float, ...]

    def __post_init__(self):
        object.__setattr__(self, "steps", tuple(self.steps))
        object.__setattr__(self, "soc_trajectory", tuple(float(s) for s in self.soc_trajectory))
        if len(self.soc_trajectory) != len(self.steps) + 1:
            raise ValueError("soc_trajectory must have len(steps) + 1 entries")

    def __len__(self) -> int:
        return len(self.steps)

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.steps], dtype=float)

    @classmethod
    def zeros(cls, steps: int, soc: float) -> "DispatchSchedule":
        return cls(tuple(DispatchStep(soc_next=soc) for _ in range(steps)), (soc,) * (steps + 1))


@dataclass(frozen=True, eq=False)
class Scenario:
    """A validated single-day scenario. Arrays are read-only."""

    params: MicrogridParams
    grid: TimeGrid
    load: np.ndarray
    pv: np.ndarray
    buy_price: np.ndarray
    sell_price: np.ndarray
    mask: np.ndarray
    bonus_weight: float

    def __post_init__(self):
        for name in ("load", "pv", "buy_price", "sell_price", "mask"):
            arr = np.array(getattr(self, name), dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def steps(self) -> int:
        return self.grid.steps

    @property
    def dt(self) -> float:
        return self.grid.dt_hours

    @property
    def ess(self) -> EssParams:
        return self.params.ess

    def window_indices(self, window: TimeGrid) -> np.ndarray:
        """Day-profile indices covered by ``window``; lookahead past the day wraps around."""
        first = int(round((window.start_hour - self.grid.start_hour) / self.dt))
        return (first + np.arange(window.steps)) % self.steps

    def with_mask(self, mask: SellWindowMask) -> "Scenario":
        return validate_scenario(
            self.params,
            self.grid,
            PowerProfile(self.load, ProfileKind.LOAD),
            PowerProfile(self.pv, ProfileKind.PV),
            TariffSchedule(self.buy_price, self.sell_price),
            mask,
        )


def _finite_nonneg(name: str, values: Sequence[float], issues: list[Issue]) -> None:
    for i, v in enumerate(values):
        if not math.isfinite(v) or v < 0:
            issues.append(Issue("InvariantViolation", name, f"entry {i} = {v} must be finite and >= 0"))
            return


def validate_scenario(
    params: MicrogridParams,
    grid: TimeGrid,
    load: PowerProfile,
    pv: PowerProfile,
    tariff: TariffSchedule,
    mask: SellWindowMask | None = None,
) -> Scenario:
    """Check every invariant and return a :class:`Scenario`.

    Raises :class:`ScenarioError` listing all problems; nothing is clamped.
    """
    issues: list[Issue] = []

    if grid.steps < 1:
        issues.append(Issue("InvariantViolation", "steps", "steps >= 1"))
    if not grid.dt_hours > 0:
        issues.append(Issue("InvariantViolation", "dt_hours", "dt_hours > 0"))
    elif grid.end_hour > HOURS_PER_DAY + 1e-9:
        issues.append(Issue("InvariantViolation", "steps", "start_hour + steps * dt_hours <= 24"))
    if grid.start_hour < 0:
        issues.append(Issue("InvariantViolation", "start_hour", "start_hour >= 0"))

    if mask is None:
        mask = SellWindowMask.zeros(grid.steps)
    series = {
        "load": load.values,
        "pv": pv.values,
        "buy_price": tariff.buy_price,
        "sell_price": tariff.sell_price,
        "mask": mask.mask,
    }
    for name, values in series.items():
        if len(values) != grid.steps:
            issues.append(Issue("LengthMismatch", name, f"length {len(values)} != grid steps {grid.steps}"))
        if name != "mask":
            _finite_nonneg(name, values, issues)
    if any(v not in (0, 1) for v in mask.mask):
        issues.append(Issue("InvariantViolation", "mask", "entries must be 0 or 1"))
    if not (math.isfinite(mask.bonus_weight) and mask.bonus_weight >= 0):
        issues.append(Issue("InvariantViolation", "bonus_weight", "bonus_weight >= 0"))

    ess = params.ess
    if not (math.isfinite(ess.capacity_kwh) and ess.capacity_kwh > 0):
        issues.append(Issue("InvariantViolation", "capacity_kwh", "capacity_kwh > 0"))
    for name in ("eta_c", "eta_d"):
        eta = getattr(ess, name)
        if not (0 < eta <= 1):
            issues.append(Issue("InvariantViolation", name, f"{name} in (0, 1]"))
    if not (0 <= ess.soc_min < ess.soc_max <= 1):
        issues.append(Issue("InvariantViolation", "soc_min", "0 <= soc_min < soc_max <= 1"))
    for name in ("soc_initial", "soc_final_target"):
        v = getattr(ess, name)
        if not (ess.soc_min <= v <= ess.soc_max):
            issues.append(Issue("InvariantViolation", name, f"soc_min <= {name} <= soc_max"))
    for name in ("p_charge_max_kw", "p_discharge_max_kw"):
        v = getattr(ess, name)
        if not (math.isfinite(v) and v >= 0):
            issues.append(Issue("InvariantViolation", name, f"{name} finite and >= 0"))
    if not (math.isfinite(params.pv_capacity_kw) and params.pv_capacity_kw >= 0):
        issues.append(Issue("InvariantViolation", "pv_capacity_kw", "pv_capacity_kw >= 0"))
    if not (math.isfinite(params.grid_limit_kw) and params.grid_limit_kw > 0):
        issues.append(Issue("InvariantViolation", "grid_limit_kw", "grid_limit_kw > 0"))

    if issues:
        raise ScenarioError(issues)
    return Scenario(
        params=params,
        grid=grid,
        load=np.asarray(load.values),
        pv=np.asarray(pv.values),
        buy_price=np.asarray(tariff.buy_price),
        sell_price=np.asarray(tariff.sell_price),
        mask=np.asarray(mask.mask),
        bonus_weight=float(mask.bonus_weight),
    )


@dataclass(frozen=True)
class SocTarget:
    """Constraint on the SoC at position ``index`` of a window trajectory."""

    index: int
    value: float
    equality: bool = True


def day_end_targets(scenario: Scenario, window: TimeGrid) -> tuple[SocTarget, ...]:
    """Equality on the final-SoC target at the step where ``window`` reaches the day end."""
    first = int(round((window.start_hour - scenario.grid.start_hour) / scenario.dt))
    offset = scenario.steps - first
    if 1 <= offset <= window.steps:
        return (SocTarget(offset, scenario.ess.soc_final_target, True),)
    return ()


@dataclass
class SolveStats:
    wall_time: float = 0.0
    nodes_explored: int = 0
    lp_iterations: int = 0
    objective: float = float("nan")
    gap: float = 0.0
    status: str = "optimal"


def discharge_factor(params: MicrogridParams) -> float:
    """SoC drained per unit of discharged energy, before dividing by capacity."""
    eta_d = params.ess.eta_d
    if params.efficiency_convention is EfficiencyConvention.PHYSICAL:
        return 1.0 / eta_d
    return eta_d


@dataclass(frozen=True, eq=False)
class WindowData:
    """Per-step inputs of one scheduling window, with its SoC anchors."""

    load: np.ndarray
    pv: np.ndarray
    buy: np.ndarray
    sell: np.ndarray
    sell_bonus: np.ndarray
    dt: float
    soc_start: float
    targets: tuple[SocTarget, ...]
    params: MicrogridParams

    @property
    def steps(self) -> int:
        return self.load.size

    def sell_weight(self, objective: Objective) -> np.ndarray:
        """Objective revenue per kWh sold, including the sell-window bonus when dynamic."""
        if objective is Objective.DYNAMIC:
            return self.sell + self.sell_bonus
        return self.sell


def window_data(
    scenario: Scenario,
    window: TimeGrid | None = None,
    soc_start: float | None = None,
    targets: Sequence[SocTarget] | None = None,
) -> WindowData:
    if window is None:
        window = scenario.grid
    idx = scenario.window_indices(window)
    if targets is None:
        targets = day_end_targets(scenario, window)
    return WindowData(
        load=scenario.load[idx],
        pv=scenario.pv[idx],
        buy=scenario.buy_price[idx],
        sell=scenario.sell_price[idx],
        sell_bonus=scenario.mask[idx] * scenario.bonus_weight,
        dt=window.dt_hours,
        soc_start=scenario.ess.soc_initial if soc_start is None else float(soc_start),
        targets=tuple(targets),
        params=scenario.params,
    )
