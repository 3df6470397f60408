"""Command-line front end: ``dipps run | sweep | bench | validate``.

Every command reads a JSON config (the bundled demo by default) and writes
plot-ready CSV/JSON into ``--out-dir``. Exit codes: 0 success, 2 config or
usage error, 3 an infeasible window, 4 a solver limit (node limit or the
enumeration guard). Failures also leave ``error.json`` in the output dir.
"""

from __future__ import annotations

import argparse
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .config import ConfigError, LoadedConfig, load_config
from .data import demo_path, write_text_atomic
from .errors import DippsError, NodeLimitExceeded, WindowInfeasible, WindowTooLarge
from .horizon import Case, compare_solvers, config_for_case, run_day, sweep_window
from .nonlinear import DEFAULT_BINARY_GUARD
from .reports import (
    SCHEMA,
    RunReport,
    bench_csv,
    bench_summary,
    monotonicity_notes,
    run_json,
    scenario_echo,
    schedule_csv,
    sweep_csv,
    totals_csv,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3
EXIT_LIMIT = 4


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", default=None, help="scenario JSON (default: bundled demo)")
    p.add_argument("--case", action="append", choices=[c.value for c in Case], help="case to run; repeatable (default: the config's cases)")
    p.add_argument("--np", type=int, default=None, dest="n_p", help="window length in steps")
    p.add_argument("--terminal-policy", choices=["DayEnd", "EveryWindow"], default=None)
    p.add_argument("--gap", type=float, default=None, help="absolute optimality gap for branch and bound")
    p.add_argument("--workers", type=int, default=None, help="threads for node LPs in branch and bound")
    p.add_argument("--node-limit", type=int, default=None)
    p.add_argument("--out-dir", default="dipps-out")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="dipps", description="Predictive power scheduling for a PV + storage microgrid.")
    sub = ap.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="day run per case: totals, schedules, run JSON")
    _add_common(run)

    sweep = sub.add_parser("sweep", help="total cost against window length")
    _add_common(sweep)
    sweep.add_argument("--np-range", type=int, nargs=2, metavar=("LO", "HI"), default=(6, 24), help="inclusive window range")

    bench = sub.add_parser("bench", help="per-window time of the MILP path against the enumeration oracle")
    _add_common(bench)
    bench.add_argument("--max-binaries", type=int, default=DEFAULT_BINARY_GUARD, help="enumeration guard")

    val = sub.add_parser("validate", help="check a config and print the scenario summary")
    val.add_argument("--config", default=None)
    return ap


def _load(args) -> LoadedConfig:
    overrides = {
        "window_steps": getattr(args, "n_p", None),
        "terminal_policy": getattr(args, "terminal_policy", None),
        "gap": getattr(args, "gap", None),
        "workers": getattr(args, "workers", None),
        "node_limit": getattr(args, "node_limit", None),
    }
    return load_config(args.config or demo_path("demo.json"), overrides)


def _cases(args, loaded: LoadedConfig) -> list[Case]:
    return [Case(c) for c in args.case] if args.case else list(loaded.cases)


def _error_record(out: Path, kind: str, message: str, **extra) -> None:
    doc = {"schema": SCHEMA, "error": kind, "message": message, **extra}
    write_text_atomic(out / "error.json", json.dumps(doc, indent=2) + "\n")


def _fail(out: Path, exc: DippsError, case: Case | None = None) -> int:
    extra = {"case": case.value} if case is not None else {}
    if isinstance(exc, WindowInfeasible):
        _error_record(out, "WindowInfeasible", str(exc), start=exc.start, policy=exc.policy, n_p=exc.n_p, **extra)
        code = EXIT_INFEASIBLE
    else:
        _error_record(out, type(exc).__name__, str(exc), **extra)
        code = EXIT_LIMIT if isinstance(exc, (NodeLimitExceeded, WindowTooLarge)) else EXIT_INFEASIBLE
    print(f"error: {exc}", file=sys.stderr)
    return code


def cmd_run(args, loaded: LoadedConfig) -> int:
    out = Path(args.out_dir)
    cases = _cases(args, loaded)
    base = loaded.base
    configs = {c: config_for_case(base, c, loaded.bonus_weight) for c in cases}

    def one(case: Case):
        try:
            return run_day(configs[case]), None
        except DippsError as exc:
            return None, exc

    with ThreadPoolExecutor(max_workers=max(1, len(cases))) as pool:
        outcomes = dict(zip(cases, pool.map(one, cases)))
    for case in cases:
        if outcomes[case][1] is not None:
            return _fail(out, outcomes[case][1], case)

    echo = scenario_echo(base.scenario, base.window_steps, base.terminal_policy.value, loaded.bonus_weight)
    report = RunReport(echo, {c: outcomes[c][0] for c in cases})
    for case in cases:
        write_text_atomic(out / f"schedule_{case.value}.csv", schedule_csv(configs[case].scenario, report.results[case]))
        write_text_atomic(out / f"run_{case.value}.json", run_json(report, case))
    table = totals_csv(report.totals_rows())
    write_text_atomic(out / "totals.csv", table)
    print(table, end="")
    return EXIT_OK


def cmd_sweep(args, loaded: LoadedConfig) -> int:
    out = Path(args.out_dir)
    lo, hi = args.np_range
    if lo < 1 or hi < lo:
        print("error: --np-range needs 1 <= LO <= HI", file=sys.stderr)
        return EXIT_CONFIG
    cases = _cases(args, loaded)
    n_values = list(range(lo, hi + 1))

    def one(case: Case):
        return sweep_window(config_for_case(loaded.base, case, loaded.bonus_weight), n_values)

    with ThreadPoolExecutor(max_workers=max(1, len(cases))) as pool:
        per_case = dict(zip(cases, pool.map(one, cases)))
    rows = [(c, r) for c in cases for r in per_case[c]]
    write_text_atomic(out / "sweep.csv", sweep_csv(rows))
    for note in monotonicity_notes(rows):
        print(f"note: {note}", file=sys.stderr)
    print(sweep_csv(rows), end="")
    return EXIT_OK


def cmd_bench(args, loaded: LoadedConfig) -> int:
    out = Path(args.out_dir)
    cases = [Case(c) for c in args.case] if args.case else [loaded.cases[0]]
    for case in cases:
        cfg = config_for_case(loaded.base, case, loaded.bonus_weight)
        try:
            _, timings = compare_solvers(cfg, max_binaries=args.max_binaries)
        except DippsError as exc:
            return _fail(out, exc, case)
        summary = {"case": case.value, "n_p": cfg.window_steps, **bench_summary(timings)}
        write_text_atomic(out / f"bench_{case.value}.csv", bench_csv(timings))
        write_text_atomic(out / f"bench_{case.value}.json", json.dumps(summary, indent=2) + "\n")
        m, e = summary["milp"], summary["enumeration"]
        print(
            f"case {case.value} N_p={cfg.window_steps}: milp mean {m['mean']:.4f}s, enumeration mean {e['mean']:.4f}s, "
            f"speedup {summary['speedup']:.1f}x, max objective difference {summary['max_objective_difference']:.2e}"
        )
    return EXIT_OK


def cmd_validate(args, loaded: LoadedConfig) -> int:
    sc = loaded.base.scenario
    print(f"config: {loaded.source}")
    print(f"steps: {sc.steps} x {sc.dt} h, window {loaded.base.window_steps}, policy {loaded.base.terminal_policy.value}")
    print(f"load: {sum(sc.load) * sc.dt:.3f} kWh, pv: {sum(sc.pv) * sc.dt:.3f} kWh, grid limit {sc.params.grid_limit_kw} kW")
    print(f"ess: {sc.ess.capacity_kwh} kWh, bonus weight {loaded.bonus_weight}, cases {','.join(c.value for c in loaded.cases)}")
    print("ok")
    return EXIT_OK


COMMANDS = {"run": cmd_run, "sweep": cmd_sweep, "bench": cmd_bench, "validate": cmd_validate}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        loaded = _load(args)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        out = getattr(args, "out_dir", None)
        if out is not None:
            _error_record(Path(out), "ConfigError", str(exc), field=exc.field, path=exc.path, line=exc.line)
        return EXIT_CONFIG
    return COMMANDS[args.command](args, loaded)


if __name__ == "__main__":
    sys.exit(main())
