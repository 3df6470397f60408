"""Exact linearization of the dispatch model into a MILP.

Each product of a bounded flow and a mode binary is replaced by a lifted
variable constrained by the four McCormick envelope inequalities. Because
one factor is always binary, the envelope is exact at integral points.
Products of a flow with two or three binaries are lifted one gate at a
time (``z -> y -> w``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .domain import (
    DispatchSchedule,
    DispatchStep,
    Objective,
    Scenario,
    SocTarget,
    TimeGrid,
    WindowData,
    discharge_factor,
    window_data,
)
from .errors import LiftInconsistency, UnboundedVariable
from .lp import LinearProgram
from .nonlinear import FLOWS, flow_gates

LIFT_TOL = 1e-6
ENVELOPE_FLOOR = 1e-3

LIFT_NAMES = (
    "z_g_es",
    "y_g_es",
    "w_g_es",
    "w_g_l",
    "y_es_g",
    "w_es_g",
    "w_pv_g",
    "y_pv_es",
    "w_pv_es",
    "w_es_l",
    "y_c_es",
    "y_es_d",
    "y_g_b",
    "y_s_g",
)


@dataclass(frozen=True)
class LiftedVar:
    name: str
    step: int
    index: int
    base: int
    gate: int
    polarity: int  # +1: multiplied by the binary, -1: by its complement
    upper_bound: float


@dataclass
class MilpProblem:
    names: list[str] = field(default_factory=list)
    lb: list[float] = field(default_factory=list)
    ub: list[float] = field(default_factory=list)
    binary: list[bool] = field(default_factory=list)
    rows: list[tuple[dict[int, float], str, float]] = field(default_factory=list)
    c: list[float] = field(default_factory=list)
    index: dict[str, int] = field(default_factory=dict)
    lifts: list[LiftedVar] = field(default_factory=list)
    binary_order: list[int] = field(default_factory=list)
    data: WindowData | None = None
    objective: Objective = Objective.STATIC

    @property
    def n_vars(self) -> int:
        return len(self.names)

    def add_var(self, name: str, lb: float, ub: float, binary: bool = False, cost: float = 0.0) -> int:
        if name in self.index:
            raise ValueError(f"duplicate variable {name}")
        if not (math.isfinite(lb) and math.isfinite(ub)):
            raise UnboundedVariable(name)
        self.index[name] = len(self.names)
        self.names.append(name)
        self.lb.append(float(lb))
        self.ub.append(float(ub))
        self.binary.append(binary)
        self.c.append(float(cost))
        if binary:
            self.binary_order.append(self.index[name])
        return self.index[name]

    def add_row(self, coefs: dict[int, float], relation: str, rhs: float) -> None:
        if relation not in ("<=", "=="):
            raise ValueError(relation)
        for j in coefs:
            if not 0 <= j < self.n_vars:
                raise ValueError(f"row references undeclared variable {j}")
        self.rows.append((dict(coefs), relation, float(rhs)))

    def var(self, name: str, step: int) -> int:
        return self.index[f"{name}[{step}]"]

    def to_lp(self) -> LinearProgram:
        n = self.n_vars
        A = np.zeros((len(self.rows), n))
        b = np.zeros(len(self.rows))
        is_eq = np.zeros(len(self.rows), dtype=bool)
        for i, (coefs, rel, rhs) in enumerate(self.rows):
            for j, v in coefs.items():
                A[i, j] += v
            b[i] = rhs
            is_eq[i] = rel == "=="
        return LinearProgram(np.array(self.c), A, b, is_eq, np.array(self.lb), np.array(self.ub))

    def to_text(self) -> str:
        """Plain-text dump: objective, one constraint per line, bounds, binaries."""

        def expr(coefs) -> str:
            return " ".join(f"{v:+.10g} {self.names[j]}" for j, v in sorted(coefs.items()) if v != 0.0) or "0"

        out = [f"\\ {self.n_vars} variables, {len(self.rows)} constraints", "minimize"]
        out.append("  obj: " + expr({j: v for j, v in enumerate(self.c)}))
        out.append("subject to")
        for i, (coefs, rel, rhs) in enumerate(self.rows):
            op = "<=" if rel == "<=" else "="
            out.append(f"  c{i}: {expr(coefs)} {op} {rhs:.10g}")
        out.append("bounds")
        for name, lo, hi in zip(self.names, self.lb, self.ub):
            out.append(f"  {lo:.10g} <= {name} <= {hi:.10g}")
        out.append("binary")
        out.extend(f"  {self.names[j]}" for j in self.binary_order)
        out.append("end")
        return "\n".join(out) + "\n"


def lift_product(problem: MilpProblem, name: str, x: int, gate: int, polarity: int, upper: float, step: int = 0) -> LiftedVar:
    """Add ``z = x * g`` (``g = b`` or ``1 - b``) with its McCormick envelope.

    Requires ``0 <= x <= upper``. Emits ``z >= 0`` (as a bound) plus the rows
    ``z <= U g``, ``z <= x`` and ``z >= x - U (1 - g)``.
    """
    if not math.isfinite(upper) or upper <= 0:
        raise UnboundedVariable(f"{name}[{step}] needs a finite positive bound, got {upper}")
    z = problem.add_var(f"{name}[{step}]", 0.0, upper)
    U = upper
    if polarity > 0:
        problem.add_row({z: 1.0, gate: -U}, "<=", 0.0)
        problem.add_row({z: 1.0, x: -1.0}, "<=", 0.0)
        problem.add_row({x: 1.0, z: -1.0, gate: U}, "<=", U)
    else:
        problem.add_row({z: 1.0, gate: U}, "<=", U)
        problem.add_row({z: 1.0, x: -1.0}, "<=", 0.0)
        problem.add_row({x: 1.0, z: -1.0, gate: -U}, "<=", 0.0)
    lift = LiftedVar(name, step, z, x, gate, polarity, U)
    problem.lifts.append(lift)
    return lift


def build_milp(
    scenario: Scenario,
    window: TimeGrid | None = None,
    objective: Objective = Objective.STATIC,
    *,
    soc_start: float | None = None,
    targets: Sequence[SocTarget] | None = None,
) -> MilpProblem:
    """Lifted MILP for one window.

    Per step: 7 flows, 3 binaries, 10 product lifts and 4 aggregates; plus
    ``steps + 1`` SoC variables. The objective is the exchange cost, with the
    sell-window bonus subtracted when ``objective`` is dynamic.
    """
    data = window_data(scenario, window, soc_start, targets)
    p = data.params
    ess = p.ess
    G = p.grid_limit_kw
    pv_peak = max(float(scenario.pv.max(initial=0.0)), ENVELOPE_FLOOR)
    pc = max(ess.p_charge_max_kw, ENVELOPE_FLOOR)
    pd = max(ess.p_discharge_max_kw, ENVELOPE_FLOOR)
    S = data.steps
    prob = MilpProblem(data=data, objective=objective)

    soc = [prob.add_var(f"soc[{k}]", ess.soc_min, ess.soc_max) for k in range(S + 1)]
    prob.lb[soc[0]] = prob.ub[soc[0]] = data.soc_start
    for t in data.targets:
        j = soc[t.index]
        if t.equality:
            prob.lb[j] = prob.ub[j] = t.value
        else:
            prob.lb[j] = max(prob.lb[j], t.value)

    weight = data.sell_weight(objective)
    d_factor = discharge_factor(p)
    scale = data.dt / ess.capacity_kwh
    for k in range(S):
        u = {
            "p_g_l": G,
            "p_g_es": min(G, pc),
            "p_es_l": pd,
            "p_es_g": pd,
            "p_pv_g": min(pv_peak, G),
            "p_pv_es": min(pv_peak, pc),
            "p_pv_l": pv_peak,
        }
        x = {f: prob.add_var(f"{f}[{k}]", 0.0, u[f]) for f in FLOWS}
        b_v = prob.add_var(f"b_v[{k}]", 0.0, 1.0, binary=True)
        b_g = prob.add_var(f"b_g[{k}]", 0.0, 1.0, binary=True)
        b_c = prob.add_var(f"b_c[{k}]", 0.0, 1.0, binary=True)

        z_g_es = lift_product(prob, "z_g_es", x["p_g_es"], b_v, -1, u["p_g_es"], k)
        y_g_es = lift_product(prob, "y_g_es", z_g_es.index, b_c, +1, u["p_g_es"], k)
        w_g_es = lift_product(prob, "w_g_es", y_g_es.index, b_g, +1, u["p_g_es"], k)
        w_g_l = lift_product(prob, "w_g_l", x["p_g_l"], b_g, +1, u["p_g_l"], k)
        y_es_g = lift_product(prob, "y_es_g", x["p_es_g"], b_c, -1, u["p_es_g"], k)
        w_es_g = lift_product(prob, "w_es_g", y_es_g.index, b_g, -1, u["p_es_g"], k)
        w_pv_g = lift_product(prob, "w_pv_g", x["p_pv_g"], b_g, -1, u["p_pv_g"], k)
        y_pv_es = lift_product(prob, "y_pv_es", x["p_pv_es"], b_c, +1, u["p_pv_es"], k)
        w_pv_es = lift_product(prob, "w_pv_es", y_pv_es.index, b_v, +1, u["p_pv_es"], k)
        w_es_l = lift_product(prob, "w_es_l", x["p_es_l"], b_c, -1, u["p_es_l"], k)

        y_c_es = prob.add_var(f"y_c_es[{k}]", 0.0, ess.p_charge_max_kw)
        y_es_d = prob.add_var(f"y_es_d[{k}]", 0.0, ess.p_discharge_max_kw)
        y_g_b = prob.add_var(f"y_g_b[{k}]", 0.0, G, cost=data.buy[k] * data.dt)
        y_s_g = prob.add_var(f"y_s_g[{k}]", 0.0, G, cost=-weight[k] * data.dt)

        # load and PV balances
        prob.add_row({w_g_l.index: 1.0, w_es_l.index: 1.0, x["p_pv_l"]: 1.0}, "==", data.load[k])
        prob.add_row({w_pv_g.index: 1.0, w_pv_es.index: 1.0, x["p_pv_l"]: 1.0}, "==", data.pv[k])
        # charge/discharge aggregates and SoC recursion
        prob.add_row({y_c_es: 1.0, w_g_es.index: -1.0, w_pv_es.index: -1.0}, "==", 0.0)
        prob.add_row({y_es_d: 1.0, w_es_g.index: -1.0, w_es_l.index: -1.0}, "==", 0.0)
        prob.add_row({soc[k + 1]: 1.0, soc[k]: -1.0, y_c_es: -ess.eta_c * scale, y_es_d: d_factor * scale}, "==", 0.0)
        # grid exchange
        prob.add_row({y_g_b: 1.0, w_g_es.index: -1.0, w_g_l.index: -1.0}, "==", 0.0)
        prob.add_row({y_s_g: 1.0, w_es_g.index: -1.0, w_pv_g.index: -1.0}, "==", 0.0)
    return prob


def expected_var_count(steps: int) -> int:
    return steps * (len(FLOWS) + len(LIFT_NAMES) + 3) + steps + 1


def recover_schedule(problem: MilpProblem, solution: np.ndarray) -> DispatchSchedule:
    """Read the dispatch back from an integral MILP solution.

    Binaries are snapped to {0, 1}; every lift is checked against its
    definition. Flows whose gate is closed carry no power and are reported
    as zero.
    """
    x = np.asarray(solution, dtype=float)
    data = problem.data
    S = data.steps
    snapped = x.copy()
    for j in problem.binary_order:
        snapped[j] = 1.0 if x[j] >= 0.5 else 0.0
    for lift in problem.lifts:
        g = snapped[lift.gate] if lift.polarity > 0 else 1.0 - snapped[lift.gate]
        expected = x[lift.base] * g
        if abs(x[lift.index] - expected) > LIFT_TOL:
            raise LiftInconsistency(lift.name, lift.step, x[lift.index], expected)

    soc = [float(x[problem.index[f"soc[{k}]"]]) for k in range(S + 1)]
    steps = []
    for k in range(S):
        bv, bg, bc = (int(snapped[problem.var(b, k)]) for b in ("b_v", "b_g", "b_c"))
        gates = flow_gates(bv, bg, bc)
        vals = {f: float(max(x[problem.var(f, k)], 0.0)) * g for f, g in zip(FLOWS, gates)}
        steps.append(DispatchStep(**vals, b_v=bv, b_g=bg, b_c=bc, soc_next=soc[k + 1]))
    return DispatchSchedule(tuple(steps), tuple(soc))


def lifted_cost(problem: MilpProblem, solution: np.ndarray, objective: Objective = Objective.STATIC) -> float:
    """Objective evaluated on the lifted exchange variables ``y_g_b`` and ``y_s_g``."""
    data = problem.data
    x = np.asarray(solution, dtype=float)
    weight = data.sell_weight(objective)
    total = 0.0
    for k in range(data.steps):
        total += data.buy[k] * x[problem.var("y_g_b", k)] - weight[k] * x[problem.var("y_s_g", k)]
    return total * data.dt
