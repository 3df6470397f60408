"""The original mixed-integer nonlinear dispatch model.

Power flows are multiplied by the mode binaries ``b_v`` (grid- vs PV-charging),
``b_g`` (buy vs sell) and ``b_c`` (charge vs discharge). This module evaluates
those nonlinear constraints for a candidate schedule, computes the exchange
cost, and solves a window exactly by enumerating every binary assignment:
with the binaries fixed each product is either the flow itself or zero, so
what remains is an LP.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .domain import (
    DispatchSchedule,
    DispatchStep,
    Objective,
    Scenario,
    SocTarget,
    SolveStats,
    TariffSchedule,
    TimeGrid,
    WindowData,
    discharge_factor,
    window_data,
)
from .errors import Infeasible, WindowTooLarge
from .lp import LinearProgram, LpStatus, solve_lp

FLOWS = DispatchStep.FLOWS
N_FLOWS = len(FLOWS)
DEFAULT_BINARY_GUARD = 24
IMPROVE_TOL = 1e-9


def flow_gates(b_v: int, b_g: int, b_c: int) -> tuple[int, ...]:
    """Product of binaries multiplying each flow wherever it appears.

    Order follows ``DispatchStep.FLOWS``. A flow whose gate is 0 has no
    effect on any constraint or on the cost.
    """
    return (
        b_g,  # p_g_l
        (1 - b_v) * b_c * b_g,  # p_g_es
        1 - b_c,  # p_es_l
        (1 - b_c) * (1 - b_g),  # p_es_g
        1 - b_g,  # p_pv_g
        b_v * b_c,  # p_pv_es
        1,  # p_pv_l
    )


def mode_bits(code: int) -> tuple[int, int, int]:
    """Decode a 3-bit mode code ordered ``(b_v, b_g, b_c)``, most significant first."""
    return (code >> 2) & 1, (code >> 1) & 1, code & 1


@dataclass
class ResidualReport:
    residuals: dict[tuple[str, int], float] = field(default_factory=dict)

    def add(self, name: str, step: int, value: float) -> None:
        self.residuals[(name, step)] = abs(float(value))

    @property
    def max_residual(self) -> float:
        return max(self.residuals.values(), default=0.0)

    def worst(self, n: int = 5) -> list[tuple[tuple[str, int], float]]:
        return sorted(self.residuals.items(), key=lambda kv: -kv[1])[:n]


def evaluate_constraints(
    schedule: DispatchSchedule,
    scenario: Scenario,
    window: TimeGrid | None = None,
    soc_start: float | None = None,
    targets: Sequence[SocTarget] | None = None,
) -> ResidualReport:
    """Residual of every nonlinear constraint at every step of ``schedule``.

    Covers the load and PV balances, the charge/discharge aggregates and
    their limits, SoC dynamics, SoC box and anchors, the grid exchange caps,
    non-negativity and integrality.
    """
    if window is None:
        window = TimeGrid(scenario.grid.start_hour, len(schedule), scenario.dt)
    data = window_data(scenario, window, soc_start, targets)
    if len(schedule) != data.steps:
        raise ValueError(f"schedule has {len(schedule)} steps, window has {data.steps}")
    params = data.params
    ess = params.ess
    d_factor = discharge_factor(params)
    report = ResidualReport()
    soc = schedule.soc_trajectory
    report.add("soc_initial", 0, soc[0] - data.soc_start)

    for k, s in enumerate(schedule.steps):
        bv, bg, bc = s.b_v, s.b_g, s.b_c
        report.add("binary", k, max(min(abs(b), abs(1 - b)) for b in (bv, bg, bc)))
        report.add("nonnegative", k, min(0.0, *(getattr(s, f) for f in FLOWS)))

        report.add("load_balance", k, data.load[k] - (s.p_g_l * bg + s.p_es_l * (1 - bc) + s.p_pv_l))
        report.add("pv_balance", k, data.pv[k] - (s.p_pv_g * (1 - bg) + s.p_pv_l + s.p_pv_es * bv * bc))

        charge = s.p_g_es * bg * (1 - bv) + s.p_pv_es * bv
        discharge = s.p_es_g * (1 - bg) + s.p_es_l
        report.add("charge_limit", k, max(0.0, charge - ess.p_charge_max_kw, -charge))
        report.add("discharge_limit", k, max(0.0, discharge - ess.p_discharge_max_kw, -discharge))

        delta = (ess.eta_c * charge * bc - d_factor * discharge * (1 - bc)) * data.dt / ess.capacity_kwh
        report.add("soc_dynamics", k, soc[k + 1] - (soc[k] + delta))
        report.add("soc_link", k, s.soc_next - soc[k + 1])

        buy = s.p_g_es * (1 - bv) * bc + s.p_g_l
        sell = s.p_es_g * (1 - bc) + s.p_pv_g
        report.add("grid_buy_limit", k, max(0.0, buy * bg - params.grid_limit_kw))
        report.add("grid_sell_limit", k, max(0.0, sell * (1 - bg) - params.grid_limit_kw))

    for k, v in enumerate(soc):
        report.add("soc_bounds", k, max(0.0, ess.soc_min - v, v - ess.soc_max))
    for t in data.targets:
        gap = soc[t.index] - t.value
        report.add("soc_target", t.index, gap if t.equality else min(0.0, gap))
    return report


def cost_j1(schedule: DispatchSchedule, tariff: TariffSchedule, dt_hours: float = 1.0) -> float:
    """Grid-exchange cost: purchases at the buy price minus sales at the sell price."""
    total = 0.0
    for k, s in enumerate(schedule.steps):
        buy = s.p_g_es * (1 - s.b_v) * s.b_c + s.p_g_l
        sell = s.p_es_g * (1 - s.b_c) + s.p_pv_g
        total += tariff.buy_price[k] * buy * s.b_g - tariff.sell_price[k] * sell * (1 - s.b_g)
    return total * dt_hours


def objective_value(schedule: DispatchSchedule, data: WindowData, objective: Objective) -> float:
    """Window objective: exchange cost, minus the sell bonus when dynamic."""
    weight = data.sell_weight(objective)
    total = 0.0
    for k, s in enumerate(schedule.steps):
        buy = s.p_g_es * (1 - s.b_v) * s.b_c + s.p_g_l
        sell = s.p_es_g * (1 - s.b_c) + s.p_pv_g
        total += data.buy[k] * buy * s.b_g - weight[k] * sell * (1 - s.b_g)
    return total * data.dt


class FixedModeLP:
    """The LP left over once every step's mode binaries are fixed.

    Rows and objective do not depend on the modes; fixing a mode only zeroes
    the upper bound of each flow whose gate is closed.
    """

    def __init__(self, data: WindowData, objective: Objective):
        self.data = data
        S = data.steps
        p = data.params
        ess = p.ess
        n = N_FLOWS * S + S + 1
        self.n = n
        soc0 = N_FLOWS * S

        def f(k: int, name: str) -> int:
            return k * N_FLOWS + FLOWS.index(name)

        A_eq, b_eq, A_le, b_le = [], [], [], []
        d_factor = discharge_factor(p)
        scale = data.dt / ess.capacity_kwh
        for k in range(S):
            row = np.zeros(n)
            row[[f(k, "p_g_l"), f(k, "p_es_l"), f(k, "p_pv_l")]] = 1.0
            A_eq.append(row)
            b_eq.append(data.load[k])
            row = np.zeros(n)
            row[[f(k, "p_pv_g"), f(k, "p_pv_es"), f(k, "p_pv_l")]] = 1.0
            A_eq.append(row)
            b_eq.append(data.pv[k])
            row = np.zeros(n)
            row[soc0 + k + 1] = 1.0
            row[soc0 + k] = -1.0
            row[[f(k, "p_g_es"), f(k, "p_pv_es")]] = -ess.eta_c * scale
            row[[f(k, "p_es_g"), f(k, "p_es_l")]] = d_factor * scale
            A_eq.append(row)
            b_eq.append(0.0)
            for names, cap in (
                (("p_g_es", "p_pv_es"), ess.p_charge_max_kw),
                (("p_es_g", "p_es_l"), ess.p_discharge_max_kw),
                (("p_g_es", "p_g_l"), p.grid_limit_kw),
                (("p_es_g", "p_pv_g"), p.grid_limit_kw),
            ):
                row = np.zeros(n)
                row[[f(k, nm) for nm in names]] = 1.0
                A_le.append(row)
                b_le.append(cap)

        c = np.zeros(n)
        weight = data.sell_weight(objective)
        for k in range(S):
            c[[f(k, "p_g_l"), f(k, "p_g_es")]] = data.buy[k] * data.dt
            c[[f(k, "p_es_g"), f(k, "p_pv_g")]] = -weight[k] * data.dt

        # per-flow caps before gating
        caps = np.zeros((S, N_FLOWS))
        G = p.grid_limit_kw
        for k in range(S):
            pv = data.pv[k]
            caps[k] = (
                G,
                min(G, ess.p_charge_max_kw),
                ess.p_discharge_max_kw,
                ess.p_discharge_max_kw,
                min(pv, G),
                min(pv, ess.p_charge_max_kw),
                pv,
            )
        self.caps = caps

        lb = np.zeros(n)
        ub = np.zeros(n)
        lb[soc0:] = ess.soc_min
        ub[soc0:] = ess.soc_max
        lb[soc0] = ub[soc0] = data.soc_start
        for t in data.targets:
            if t.equality:
                lb[soc0 + t.index] = ub[soc0 + t.index] = t.value
            else:
                lb[soc0 + t.index] = max(lb[soc0 + t.index], t.value)
        self.base_lb = lb
        self.base_ub = ub
        self.soc0 = soc0
        self.lp = LinearProgram.build(c, A_le, b_le, A_eq, b_eq, lb, ub)

    def step_feasible(self, k: int, gates: tuple[int, ...]) -> bool:
        """Necessary per-step condition: load can be supplied and PV absorbed."""
        caps = self.caps[k] * np.asarray(gates)
        d = self.data
        p = d.params
        ess = p.ess
        supply = min(caps[0], p.grid_limit_kw) + min(caps[2], ess.p_discharge_max_kw) + caps[6]
        absorb = min(caps[4], p.grid_limit_kw) + min(caps[5], ess.p_charge_max_kw) + min(d.load[k], caps[6])
        tol = 1e-9
        return d.load[k] <= supply + tol and d.pv[k] <= absorb + tol

    def bounds_for(self, gates_per_step: Sequence[tuple[int, ...]]) -> tuple[np.ndarray, np.ndarray]:
        ub = self.base_ub.copy()
        ub[: self.soc0] = (self.caps * np.asarray(gates_per_step)).reshape(-1)
        return self.base_lb, ub

    def schedule(self, x: np.ndarray, modes: Sequence[tuple[int, int, int]]) -> DispatchSchedule:
        S = self.data.steps
        flows = x[: self.soc0].reshape(S, N_FLOWS)
        soc = x[self.soc0 :]
        steps = []
        for k in range(S):
            bv, bg, bc = modes[k]
            vals = {name: float(max(flows[k, i], 0.0)) for i, name in enumerate(FLOWS)}
            steps.append(DispatchStep(**vals, b_v=bv, b_g=bg, b_c=bc, soc_next=float(soc[k + 1])))
        return DispatchSchedule(tuple(steps), tuple(float(v) for v in soc))


def _step_candidates(model: FixedModeLP, k: int) -> list[int]:
    """Mode codes worth an LP at step ``k``, in ascending code order.

    With the modes fixed, a step enters the LP only through the flow upper
    bounds ``caps * gates``. A code is skipped when a smaller code yields
    bounds at least as loose: any schedule it admits is admitted by an
    assignment that comes earlier in enumeration order, which wins ties.
    Codes failing the per-step supply/absorption check are dropped too.
    """
    kept: list[tuple[int, np.ndarray]] = []
    for code in range(8):
        gates = flow_gates(*mode_bits(code))
        if not model.step_feasible(k, gates):
            continue
        ub = model.caps[k] * np.asarray(gates)
        if any(np.all(ub <= prev) for _, prev in kept):
            continue
        kept.append((code, ub))
    return [code for code, _ in kept]


def solve_minlp_enumerate(
    scenario: Scenario,
    window: TimeGrid | None = None,
    objective: Objective = Objective.STATIC,
    *,
    soc_start: float | None = None,
    targets: Sequence[SocTarget] | None = None,
    max_binaries: int = DEFAULT_BINARY_GUARD,
) -> tuple[DispatchSchedule, SolveStats]:
    """Globally optimal window schedule by exhaustive mode enumeration.

    Every one of the ``2**(3 * steps)`` binary assignments is covered, in
    lexicographic ``(b_v, b_g, b_c)`` order with the first step most
    significant; the first assignment reaching the best objective wins.
    Assignments that provably induce the same LP as an earlier one, or that
    fail a per-step supply/absorption check, are accounted for without an
    LP solve.
    """
    if window is None:
        window = scenario.grid
    if 3 * window.steps > max_binaries:
        raise WindowTooLarge(3 * window.steps, max_binaries)
    t0 = time.perf_counter()
    data = window_data(scenario, window, soc_start, targets)
    model = FixedModeLP(data, objective)
    candidates = [_step_candidates(model, k) for k in range(data.steps)]
    gate_table = {code: flow_gates(*mode_bits(code)) for code in range(8)}

    best_obj = np.inf
    best = None
    n_lp = 0
    iters = 0
    basis = None
    # neighbouring assignments differ only in bounds, so each LP is
    # warm-started from the previous basis
    for combo in itertools.product(*candidates):
        lb, ub = model.bounds_for([gate_table[c] for c in combo])
        sol = solve_lp(model.lp.with_bounds(lb, ub), warm_start=basis)
        if sol.basis is not None:
            basis = sol.basis
        n_lp += 1
        iters += sol.iterations
        if sol.status is LpStatus.OPTIMAL and sol.objective < best_obj - IMPROVE_TOL:
            best_obj = sol.objective
            best = (sol.x, combo)

    stats = SolveStats(
        wall_time=time.perf_counter() - t0,
        nodes_explored=n_lp,
        lp_iterations=iters,
        objective=float(best_obj),
        status="optimal" if best is not None else "infeasible",
    )
    if best is None:
        raise Infeasible(f"no binary assignment is feasible ({n_lp} LPs tried)")
    x, combo = best
    schedule = model.schedule(x, [mode_bits(c) for c in combo])
    stats.objective = objective_value(schedule, data, objective)
    return schedule, stats
