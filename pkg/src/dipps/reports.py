"""Plot-ready CSV/JSON reports for day runs, window sweeps and solver timing.

Wall-clock fields live in their own columns (named ``*_time`` or
``wall_time``) so that everything else is byte-reproducible.
"""

from __future__ import annotations

import csv
import io
import json
import math
import statistics
from dataclasses import dataclass, field
from typing import Iterable, Sequence

from .domain import DispatchStep, Scenario
from .horizon import Case, DailyResult, SweepRow, WindowTiming

SCHEMA = 1
TIMING_COLUMNS = ("wall_time", "milp_time", "enum_time")


@dataclass(frozen=True)
class TimingSummary:
    count: int
    mean: float
    min: float
    max: float
    stddev: float  # sample standard deviation (N - 1 denominator)

    def as_dict(self) -> dict:
        return {"count": self.count, "mean": self.mean, "min": self.min, "max": self.max, "stddev": self.stddev}


def summarize(times: Sequence[float]) -> TimingSummary:
    """Mean, extremes and sample standard deviation of ``times``."""
    xs = [float(t) for t in times]
    if not xs:
        nan = float("nan")
        return TimingSummary(0, nan, nan, nan, nan)
    sd = statistics.stdev(xs) if len(xs) > 1 else 0.0
    return TimingSummary(len(xs), statistics.fmean(xs), min(xs), max(xs), sd)


@dataclass
class RunReport:
    scenario: dict
    results: dict[Case, DailyResult] = field(default_factory=dict)

    def totals_rows(self) -> list[dict]:
        return [totals_row(case, res) for case, res in self.results.items()]

    def timing(self, case: Case) -> TimingSummary:
        return summarize([s.wall_time for s in self.results[case].window_stats])


def scenario_echo(scenario: Scenario, window_steps: int, terminal_policy: str, bonus_weight: float) -> dict:
    ess = scenario.ess
    return {
        "steps": scenario.steps,
        "dt_hours": scenario.dt,
        "window_steps": window_steps,
        "terminal_policy": terminal_policy,
        "bonus_weight": bonus_weight,
        "grid_limit_kw": scenario.params.grid_limit_kw,
        "pv_capacity_kw": scenario.params.pv_capacity_kw,
        "efficiency_convention": scenario.params.efficiency_convention.value,
        "ess": {
            "capacity_kwh": ess.capacity_kwh,
            "eta_c": ess.eta_c,
            "eta_d": ess.eta_d,
            "soc_min": ess.soc_min,
            "soc_max": ess.soc_max,
            "soc_initial": ess.soc_initial,
            "soc_final_target": ess.soc_final_target,
            "p_charge_max_kw": ess.p_charge_max_kw,
            "p_discharge_max_kw": ess.p_discharge_max_kw,
        },
        "load": scenario.load.tolist(),
        "pv": scenario.pv.tolist(),
        "buy_price": scenario.buy_price.tolist(),
        "sell_price": scenario.sell_price.tolist(),
    }


def totals_row(case: Case | str, result: DailyResult) -> dict:
    return {
        "case": Case(case).value,
        "P_S_G": result.sold_kwh,
        "P_ES_G": result.ess_to_grid_kwh,
        "P_G_B": result.bought_kwh,
        "total_cost": result.total_cost,
    }


def _csv(header: Sequence[str], rows: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v) if math.isfinite(v) else ("nan" if math.isnan(v) else repr(v))
    return str(v)


def totals_csv(rows: Sequence[dict]) -> str:
    header = ("case", "P_S_G", "P_ES_G", "P_G_B", "total_cost")
    return _csv(header, ([r[h] for h in header] for r in rows))


def schedule_csv(scenario: Scenario, result: DailyResult) -> str:
    """One row per committed step: inputs, flows, binaries, SoC, then solver stats."""
    header = (
        "step", "hour", "load", "pv", "buy_price", "sell_price", "mask",
        *DispatchStep.FLOWS, *DispatchStep.BINARIES, "soc_start", "soc_end",
        "grid_buy", "grid_sell", "nodes", "lp_iterations", "wall_time",
    )  # fmt: skip
    sched = result.schedule
    rows = []
    for k, (s, st) in enumerate(zip(sched.steps, result.window_stats)):
        rows.append(
            (
                k,
                scenario.grid.start_hour + k * scenario.dt,
                float(scenario.load[k]),
                float(scenario.pv[k]),
                float(scenario.buy_price[k]),
                float(scenario.sell_price[k]),
                int(scenario.mask[k]),
                *(float(getattr(s, f)) for f in DispatchStep.FLOWS),
                *(int(getattr(s, b)) for b in DispatchStep.BINARIES),
                sched.soc_trajectory[k],
                sched.soc_trajectory[k + 1],
                s.grid_buy,
                s.grid_sell,
                st.nodes_explored,
                st.lp_iterations,
                st.wall_time,
            )
        )
    return _csv(header, rows)


def run_json(report: RunReport, case: Case) -> str:
    res = report.results[case]
    doc = {
        "schema": SCHEMA,
        "case": case.value,
        "scenario": report.scenario,
        "totals": totals_row(case, res),
        "soc_trajectory": list(res.schedule.soc_trajectory),
        "timing": report.timing(case).as_dict(),
    }
    return json.dumps(doc, indent=2) + "\n"


def sweep_csv(rows: Sequence[tuple[Case, SweepRow]]) -> str:
    return _csv(("n_p", "case", "total_cost", "feasible"), ((r.n_p, c.value, r.total_cost, r.feasible) for c, r in rows))


def monotonicity_notes(rows: Sequence[tuple[Case, SweepRow]]) -> list[str]:
    """Informational notes where cost fails to improve as the window grows."""
    notes = []
    by_case: dict[Case, list[SweepRow]] = {}
    for c, r in rows:
        by_case.setdefault(c, []).append(r)
    for c, rs in by_case.items():
        feasible = sorted((r for r in rs if r.feasible), key=lambda r: r.n_p)
        for a, b in zip(feasible, feasible[1:]):
            if b.n_p > a.n_p and b.total_cost > a.total_cost + 1e-9:
                notes.append(f"case {c.value}: cost rises from {a.total_cost:.6f} at N_p={a.n_p} to {b.total_cost:.6f} at N_p={b.n_p}")
    return notes


def bench_csv(timings: Sequence[WindowTiming]) -> str:
    header = ("start", "milp_objective", "enum_objective", "milp_nodes", "enum_lps", "milp_time", "enum_time")
    return _csv(
        header,
        ((t.start, t.milp_objective, t.enum_objective, t.milp_nodes, t.enum_lps, t.milp_time, t.enum_time) for t in timings),
    )


def bench_summary(timings: Sequence[WindowTiming]) -> dict:
    milp = summarize([t.milp_time for t in timings])
    enum = summarize([t.enum_time for t in timings])
    worst = float(max((abs(t.milp_objective - t.enum_objective) for t in timings), default=0.0))
    return {
        "schema": SCHEMA,
        "windows": len(timings),
        "milp": milp.as_dict(),
        "enumeration": enum.as_dict(),
        "speedup": enum.mean / milp.mean if milp.mean > 0 else float("inf"),
        "max_objective_difference": worst,
    }
