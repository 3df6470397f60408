"""Receding-horizon day runs.

For every step T of the day a window of ``window_steps`` steps starting at
T is optimized (lookahead past the day end wraps to the same day), the first
step is committed and its SoC carried into the next window.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .domain import (
    DispatchSchedule,
    Objective,
    Scenario,
    SellWindowMask,
    SocTarget,
    SolveStats,
    TariffSchedule,
    TimeGrid,
    default_bonus_weight,
)
from .errors import DippsError, Infeasible, WindowInfeasible, WindowTooLarge
from .linearize import build_milp, recover_schedule
from .milp import MilpOptions, solve_milp
from .nonlinear import cost_j1, solve_minlp_enumerate


class TerminalPolicy(str, Enum):
    DAY_END = "DayEnd"
    EVERY_WINDOW = "EveryWindow"


class Case(str, Enum):
    A = "A"
    B = "B"
    C = "C"


SELL_HOURS = {Case.A: None, Case.B: (0.0, 6.0), Case.C: (18.0, 24.0)}


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: Scenario
    window_steps: int = 6
    objective: Objective = Objective.STATIC
    terminal_policy: TerminalPolicy = TerminalPolicy.EVERY_WINDOW
    milp: MilpOptions = MilpOptions()

    def __post_init__(self):
        if self.window_steps < 1:
            raise ValueError("window_steps must be >= 1")
        if len(self.scenario.mask) != self.scenario.steps:
            raise ValueError("mask must cover the day")


@dataclass
class DailyResult:
    schedule: DispatchSchedule
    window_stats: list[SolveStats]
    total_cost: float
    sold_kwh: float  # energy sold to the grid
    ess_to_grid_kwh: float  # part of it discharged from storage
    bought_kwh: float

    @property
    def committed_soc(self) -> np.ndarray:
        return np.asarray(self.schedule.soc_trajectory)


@dataclass
class SweepRow:
    n_p: int
    total_cost: float
    feasible: bool
    error: str = ""
    result: DailyResult | None = field(default=None, repr=False)


@dataclass
class WindowTiming:
    start: int
    milp_time: float
    enum_time: float
    milp_objective: float
    enum_objective: float
    milp_nodes: int
    enum_lps: int


def make_case_mask(case: Case | str, grid: TimeGrid, bonus_weight: float = 0.0) -> SellWindowMask:
    """Sell-window mask of a case: none for A, hours [0, 6) for B, [18, 24) for C."""
    case = Case(case)
    hours = SELL_HOURS[case]
    if hours is None:
        return SellWindowMask.zeros(grid.steps, bonus_weight)
    lo, hi = hours
    mask = []
    for k in range(grid.steps):
        h = grid.start_hour + k * grid.dt_hours
        mask.append(int(lo <= h < hi))
    return SellWindowMask(tuple(mask), bonus_weight)


def case_objective(case: Case | str) -> Objective:
    return Objective.STATIC if Case(case) is Case.A else Objective.DYNAMIC


def config_for_case(base: ScenarioConfig, case: Case | str, bonus_weight: float | None = None) -> ScenarioConfig:
    """``base`` with the mask and objective of ``case``.

    ``bonus_weight`` defaults to the scenario's own, or to
    :func:`default_bonus_weight` when that is zero.
    """
    sc = base.scenario
    if bonus_weight is None:
        bonus_weight = sc.bonus_weight or default_bonus_weight(TariffSchedule(sc.buy_price, sc.sell_price))
    mask = make_case_mask(case, sc.grid, bonus_weight)
    return replace(base, scenario=sc.with_mask(mask), objective=case_objective(case))


def window_targets(scenario: Scenario, start: int, n_p: int, policy: TerminalPolicy) -> tuple[SocTarget, ...]:
    """Terminal SoC constraints for the window starting at day step ``start``.

    Both policies constrain the SoC at the day-end position of any window
    that reaches it (lookahead beyond it wraps to the same day). EveryWindow
    asks for at least the final target there and pins it exactly in the
    day's last window; DayEnd pins it exactly in every such window.
    """
    offset = scenario.steps - start
    if offset > n_p:
        return ()
    exact = TerminalPolicy(policy) is TerminalPolicy.DAY_END or offset == 1
    return (SocTarget(offset, scenario.ess.soc_final_target, exact),)


def window_grid(scenario: Scenario, start: int, n_p: int) -> TimeGrid:
    g = scenario.grid
    return TimeGrid(g.start_hour + start * g.dt_hours, n_p, g.dt_hours)


def run_day(config: ScenarioConfig, on_window=None) -> DailyResult:
    """Roll the window over the day and commit one step per window.

    Raises :class:`WindowInfeasible` naming the first window without a
    feasible schedule. ``on_window(T, schedule, stats, soc_start, targets)``
    is called after each solve if given.
    """
    sc = config.scenario
    policy = TerminalPolicy(config.terminal_policy)
    soc = sc.ess.soc_initial
    committed = []
    trajectory = [soc]
    stats_list = []
    for T in range(sc.steps):
        window = window_grid(sc, T, config.window_steps)
        targets = window_targets(sc, T, config.window_steps, policy)
        prob = build_milp(sc, window, config.objective, soc_start=soc, targets=targets)
        try:
            x, stats = solve_milp(prob, config.milp)
        except Infeasible:
            raise WindowInfeasible(T, policy.value, config.window_steps) from None
        plan = recover_schedule(prob, x)
        if on_window is not None:
            on_window(T, plan, stats, soc, targets)
        committed.append(plan.steps[0])
        soc = plan.soc_trajectory[1]
        trajectory.append(soc)
        stats_list.append(stats)

    schedule = DispatchSchedule(tuple(committed), tuple(trajectory))
    dt = sc.dt
    return DailyResult(
        schedule=schedule,
        window_stats=stats_list,
        total_cost=cost_j1(schedule, TariffSchedule(sc.buy_price, sc.sell_price), dt),
        sold_kwh=float(sum(s.grid_sell for s in committed) * dt),
        ess_to_grid_kwh=float(sum(s.p_es_g for s in committed) * dt),
        bought_kwh=float(sum(s.grid_buy for s in committed) * dt),
    )


def sweep_window(config: ScenarioConfig, n_p_values: Iterable[int]) -> list[SweepRow]:
    """One day run per window length, in the given order; failures are kept as rows."""
    rows = []
    for n_p in n_p_values:
        try:
            res = run_day(replace(config, window_steps=int(n_p)))
        except DippsError as exc:
            rows.append(SweepRow(int(n_p), float("nan"), False, str(exc)))
            continue
        rows.append(SweepRow(int(n_p), res.total_cost, True, "", res))
    return rows


def compare_solvers(config: ScenarioConfig, max_binaries: int = 24) -> tuple[DailyResult, list[WindowTiming]]:
    """Run the day with the MILP and re-solve every window with the enumeration oracle.

    Both solvers see identical windows: the same start SoC and terminal
    constraints as the committed MILP run.
    """
    sc = config.scenario
    if 3 * config.window_steps > max_binaries:
        raise WindowTooLarge(3 * config.window_steps, max_binaries)
    timings: list[WindowTiming] = []

    def oracle(T, plan, stats, soc_start, targets: Sequence[SocTarget]):
        window = window_grid(sc, T, config.window_steps)
        t0 = time.perf_counter()
        _, est = solve_minlp_enumerate(
            sc, window, config.objective, soc_start=soc_start, targets=targets, max_binaries=max_binaries
        )
        enum_time = time.perf_counter() - t0
        timings.append(WindowTiming(T, stats.wall_time, enum_time, stats.objective, est.objective, stats.nodes_explored, est.nodes_explored))

    result = run_day(config, on_window=oracle)
    return result, timings
