import math

import numpy as np
import pytest
from dataclasses import replace

from dipps.domain import Objective, SocTarget, TimeGrid
from dipps.errors import WindowInfeasible
from dipps.horizon import (
    Case,
    ScenarioConfig,
    TerminalPolicy,
    case_objective,
    config_for_case,
    make_case_mask,
    run_day,
    sweep_window,
    window_targets,
)

from helpers import flat_scenario

DAY = TimeGrid()


def test_case_masks():
    assert sum(make_case_mask(Case.A, DAY).mask) == 0
    b = make_case_mask(Case.B, DAY).mask
    c = make_case_mask(Case.C, DAY).mask
    assert [k for k, v in enumerate(b) if v] == list(range(0, 6))
    assert [k for k, v in enumerate(c) if v] == list(range(18, 24))
    assert case_objective(Case.A) is Objective.STATIC
    assert case_objective("B") is case_objective("C") is Objective.DYNAMIC


def test_case_mask_on_half_hour_grid():
    mask = make_case_mask(Case.C, TimeGrid(0, 48, 0.5)).mask
    assert [k for k, v in enumerate(mask) if v] == list(range(36, 48))


def test_config_for_case_bonus():
    base = ScenarioConfig(flat_scenario(buy=0.2, sell=0.1))
    cfg = config_for_case(base, Case.B)
    assert cfg.scenario.bonus_weight == pytest.approx(1.1)
    assert cfg.objective is Objective.DYNAMIC
    assert config_for_case(base, Case.C, 0.05).scenario.bonus_weight == 0.05


def test_window_targets_every_window():
    sc = flat_scenario()
    assert window_targets(sc, 0, 6, TerminalPolicy.EVERY_WINDOW) == ()
    assert window_targets(sc, 17, 6, TerminalPolicy.EVERY_WINDOW) == ()
    assert window_targets(sc, 18, 6, TerminalPolicy.EVERY_WINDOW) == (SocTarget(6, 0.5, False),)
    assert window_targets(sc, 20, 6, TerminalPolicy.EVERY_WINDOW) == (SocTarget(4, 0.5, False),)
    assert window_targets(sc, 20, 9, TerminalPolicy.EVERY_WINDOW) == (SocTarget(4, 0.5, False),)
    assert window_targets(sc, 23, 6, TerminalPolicy.EVERY_WINDOW) == (SocTarget(1, 0.5, True),)


def test_window_targets_day_end():
    sc = flat_scenario()
    assert window_targets(sc, 17, 6, TerminalPolicy.DAY_END) == ()
    assert window_targets(sc, 18, 6, TerminalPolicy.DAY_END) == (SocTarget(6, 0.5, True),)
    assert window_targets(sc, 20, 6, TerminalPolicy.DAY_END) == (SocTarget(4, 0.5, True),)
    assert window_targets(sc, 23, 6, TerminalPolicy.DAY_END) == (SocTarget(1, 0.5, True),)


def test_zero_scenario_day():
    # with nothing to earn from selling stored energy the storage stays idle
    res = run_day(ScenarioConfig(flat_scenario(buy=0.2, sell=0.0), window_steps=4))
    assert res.total_cost == 0.0
    assert res.schedule.soc_trajectory == (0.5,) * 25
    assert res.sold_kwh == res.bought_kwh == res.ess_to_grid_kwh == 0.0
    assert len(res.window_stats) == 24


def test_myopic_windows_sell_and_buy_back():
    # windows that end before the day end carry no terminal value: they sell
    # the storage down to soc_min and the last windows buy it back
    res = run_day(ScenarioConfig(flat_scenario(buy=0.2, sell=0.1, capacity=10.0), window_steps=4))
    energy = 0.3 * 10.0 / 0.95
    assert res.ess_to_grid_kwh == pytest.approx(energy, abs=1e-9)
    assert res.bought_kwh == pytest.approx(energy, abs=1e-9)
    assert res.total_cost == pytest.approx(energy * (0.2 - 0.1), abs=1e-9)
    assert res.schedule.soc_trajectory[-1] == pytest.approx(0.5, abs=1e-9)


def test_day_end_policy_keeps_idle_storage():
    cfg = ScenarioConfig(flat_scenario(buy=0.2, sell=0.1), window_steps=24, terminal_policy=TerminalPolicy.DAY_END)
    res = run_day(cfg)
    assert res.total_cost == pytest.approx(0.0, abs=1e-12)


def test_flat_load_day_buys_everything():
    res = run_day(ScenarioConfig(flat_scenario(load=1.0, buy=0.2, sell=0.1), window_steps=4))
    # a lossless round trip under flat prices changes nothing
    assert res.bought_kwh == pytest.approx(24.0, abs=1e-9)
    assert res.total_cost == pytest.approx(4.8, abs=1e-9)


def test_window_infeasible_names_window():
    # the ESS cannot be emptied fast enough to sell away a large surplus with a tiny export limit
    sc = flat_scenario(pv=[0.0] * 12 + [6.0] + [0.0] * 11, grid_limit=0.5, capacity=2.0)
    with pytest.raises(WindowInfeasible) as info:
        run_day(ScenarioConfig(sc, window_steps=2))
    assert info.value.start <= 12
    assert (info.value.policy, info.value.n_p) == ("EveryWindow", 2)


def test_sweep_duplicates_preserve_order():
    cfg = ScenarioConfig(flat_scenario(load=0.5))
    rows = sweep_window(cfg, [3, 2, 3])
    assert [r.n_p for r in rows] == [3, 2, 3]
    assert all(r.feasible for r in rows)
    assert rows[0].total_cost == rows[2].total_cost


def test_demo_single_step_window_is_infeasible(demo_configs):
    rows = sweep_window(demo_configs[Case.A], [1])
    assert len(rows) == 1
    assert not rows[0].feasible
    assert math.isnan(rows[0].total_cost)
    assert "N_p=1" in rows[0].error


def test_demo_short_windows(demo_configs):
    """Only the one-step window fails on the bundled day; two to five steps recover in time."""
    rows = sweep_window(demo_configs[Case.A], [1, 2, 3, 4, 5, 6])
    assert [r.feasible for r in rows] == [False, True, True, True, True, True]


def test_demo_day_end_policy_runs(demo_configs):
    cfg = replace(demo_configs[Case.A], terminal_policy=TerminalPolicy.DAY_END)
    res = run_day(cfg)
    assert res.schedule.soc_trajectory[-1] == pytest.approx(0.5, abs=1e-9)


@pytest.mark.parametrize("case", list(Case))
def test_committed_invariants(demo, demo_results, case):
    res = demo_results[case]
    sched = res.schedule
    soc = np.asarray(sched.soc_trajectory)
    ess = demo.base.scenario.ess
    # continuity: each committed step ends where the next window starts
    for k, s in enumerate(sched.steps):
        assert abs(s.soc_next - soc[k + 1]) <= 1e-9
    assert np.all(soc >= ess.soc_min - 1e-9) and np.all(soc <= ess.soc_max + 1e-9)
    for s in sched.steps:
        assert min(s.grid_buy, s.grid_sell) <= 1e-6
        assert min(s.charge, s.discharge) <= 1e-6
    assert res.sold_kwh == pytest.approx(sum(s.grid_sell for s in sched.steps))
    assert len(res.window_stats) == 24


def test_static_total_cost_for_every_case(demo_configs, demo_results):
    from dipps.domain import TariffSchedule
    from dipps.nonlinear import cost_j1

    for case, res in demo_results.items():
        sc = demo_configs[case].scenario
        assert res.total_cost == pytest.approx(cost_j1(res.schedule, TariffSchedule(sc.buy_price, sc.sell_price)))


@pytest.mark.slow
def test_demo_full_sweep_feasible(demo_configs):
    rows = sweep_window(demo_configs[Case.A], range(6, 25))
    assert [r.n_p for r in rows] == list(range(6, 25))
    assert all(r.feasible for r in rows)
    costs = [r.total_cost for r in rows]
    assert all(b <= a + 1e-9 for a, b in zip(costs, costs[1:]))
    assert costs[0] == pytest.approx(-0.4160790875853432, abs=1e-9)
    assert costs[-1] == pytest.approx(-0.4740479253711606, abs=1e-9)
