import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from dipps.data import random_scenario
from dipps.domain import DispatchStep, Objective, SellWindowMask, TariffSchedule, TimeGrid
from dipps.errors import Infeasible, LiftInconsistency, UnboundedVariable
from dipps.horizon import Case
from dipps.linearize import LIFT_NAMES, MilpProblem, build_milp, expected_var_count, lift_product, lifted_cost, recover_schedule
from dipps.lp import LpStatus, solve_lp
from dipps.milp import solve_milp
from dipps.nonlinear import cost_j1, evaluate_constraints, solve_minlp_enumerate

from helpers import flat_scenario


def _envelope_range(g: float, x: float, upper: float = 10.0, polarity: int = 1) -> tuple[float, float]:
    """Feasible interval of the lifted variable with ``x`` and the gate fixed."""
    prob = MilpProblem()
    xi = prob.add_var("x", x, x)
    gi = prob.add_var("g", g, g)
    z = lift_product(prob, "z", xi, gi, polarity, upper).index
    lp = prob.to_lp()
    out = []
    for sign in (1.0, -1.0):
        c = np.zeros(prob.n_vars)
        c[z] = sign
        lp.c = c
        sol = solve_lp(lp)
        assert sol.status is LpStatus.OPTIMAL
        out.append(sol.x[z])
    return out[0], out[1]


def test_envelope_gate_zero_forces_zero():
    assert _envelope_range(0.0, 4.0) == pytest.approx((0.0, 0.0), abs=1e-12)


def test_envelope_gate_one_forces_x():
    assert _envelope_range(1.0, 4.0) == pytest.approx((4.0, 4.0), abs=1e-12)


def test_envelope_complement_polarity():
    assert _envelope_range(1.0, 4.0, polarity=-1) == pytest.approx((0.0, 0.0), abs=1e-12)
    assert _envelope_range(0.0, 4.0, polarity=-1) == pytest.approx((4.0, 4.0), abs=1e-12)


def test_envelope_relaxation_interval():
    # max(0, 4 - 10 * 0.5) = 0 and min(4, 10 * 0.5) = 4
    assert _envelope_range(0.5, 4.0, upper=10.0) == pytest.approx((0.0, 4.0), abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(x=st.floats(0, 10), g=st.floats(0, 1), polarity=st.sampled_from([1, -1]))
def test_envelope_matches_closed_form(x, g, polarity):
    U = 10.0
    gate = g if polarity > 0 else 1 - g
    lo, hi = _envelope_range(g, x, U, polarity)
    assert lo == pytest.approx(max(0.0, x - U * (1 - gate)), abs=1e-9)
    assert hi == pytest.approx(min(x, U * gate), abs=1e-9)


def test_unbounded_lift_rejected():
    prob = MilpProblem()
    x = prob.add_var("x", 0, 1)
    g = prob.add_var("g", 0, 1, binary=True)
    with pytest.raises(UnboundedVariable):
        lift_product(prob, "z", x, g, 1, math.inf)
    with pytest.raises(UnboundedVariable):
        prob.add_var("free", 0, math.inf)


@pytest.mark.parametrize("steps", [1, 2, 4, 6, 24])
def test_variable_count(steps):
    sc = flat_scenario(steps=24, load=1.0, pv=2.0)
    prob = build_milp(sc, TimeGrid(0, steps, 1.0))
    assert prob.n_vars == steps * (7 + 14 + 3) + steps + 1 == expected_var_count(steps)
    assert len(prob.binary_order) == 3 * steps
    assert len(prob.lifts) == 10 * steps
    assert len(LIFT_NAMES) == 14


def test_binary_order_is_step_then_vgc():
    prob = build_milp(flat_scenario(steps=2))
    assert [prob.names[j] for j in prob.binary_order] == ["b_v[0]", "b_g[0]", "b_c[0]", "b_v[1]", "b_g[1]", "b_c[1]"]


def test_zero_single_step():
    sc = flat_scenario(steps=1)
    prob = build_milp(sc)
    x, stats = solve_milp(prob)
    assert stats.objective == 0.0
    sched = recover_schedule(prob, x)
    assert all(getattr(sched.steps[0], f) == 0.0 for f in DispatchStep.FLOWS)
    assert sched.soc_trajectory == (0.5, 0.5)


def test_text_dump():
    text = build_milp(flat_scenario(steps=1)).to_text()
    assert text.startswith(f"\\ {expected_var_count(1)} variables")
    assert "binary\n  b_v[0]\n  b_g[0]\n  b_c[0]\nend" in text


def test_recover_zero_solution():
    prob = build_milp(flat_scenario(steps=2))
    sched = recover_schedule(prob, np.zeros(prob.n_vars))
    assert all(getattr(s, f) == 0.0 for s in sched.steps for f in DispatchStep.FLOWS)
    assert sched.soc_trajectory == (0.0, 0.0, 0.0)


def _single_lift_solution(prob, gate_value, base_value, lift_value):
    lift = next(l for l in prob.lifts if l.name == "w_g_l")
    x = np.zeros(prob.n_vars)
    x[lift.gate] = gate_value
    x[lift.base] = base_value
    x[lift.index] = lift_value
    return x


def test_recover_accepts_consistent_lift():
    prob = build_milp(flat_scenario(steps=1))
    sched = recover_schedule(prob, _single_lift_solution(prob, 1.0, 2.5, 2.5))
    assert sched.steps[0].p_g_l == 2.5
    assert sched.steps[0].b_g == 1


def test_recover_rejects_inconsistent_lift():
    prob = build_milp(flat_scenario(steps=1))
    with pytest.raises(LiftInconsistency) as info:
        recover_schedule(prob, _single_lift_solution(prob, 0.0, 2.5, 2.5))
    assert (info.value.lift, info.value.step) == ("w_g_l", 0)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), steps=st.integers(1, 4))
def test_zero_mask_dynamic_equals_static(seed, steps):
    sc = random_scenario(np.random.default_rng(seed), steps)
    sc = sc.with_mask(SellWindowMask.zeros(steps, 5.0))
    _, s_static = solve_milp(build_milp(sc, objective=Objective.STATIC))
    _, s_dyn = solve_milp(build_milp(sc, objective=Objective.DYNAMIC))
    assert s_dyn.objective == pytest.approx(s_static.objective, abs=1e-9)


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), steps=st.integers(1, 4))
def test_lifted_cost_equals_nonlinear_cost(seed, steps):
    sc = random_scenario(np.random.default_rng(seed), steps)
    prob = build_milp(sc)
    x, stats = solve_milp(prob)
    sched = recover_schedule(prob, x)
    tariff = TariffSchedule(sc.buy_price, sc.sell_price)
    assert lifted_cost(prob, x) == pytest.approx(stats.objective, abs=1e-9)
    assert cost_j1(sched, tariff) == pytest.approx(stats.objective, abs=1e-9)
    assert evaluate_constraints(sched, sc).max_residual <= 1e-6


@pytest.mark.parametrize("start", [0, 6, 10, 15, 20])
def test_demo_subwindows_match_oracle(demo_configs, start):
    cfg = demo_configs[Case.A]
    sc = cfg.scenario
    window = TimeGrid(start, 4, 1.0)
    for soc in (0.2, 0.5, 0.8):
        try:
            _, ostats = solve_minlp_enumerate(sc, window, soc_start=soc)
        except Infeasible:
            # full storage at midday: surplus PV exceeds the export limit
            with pytest.raises(Infeasible):
                solve_milp(build_milp(sc, window, soc_start=soc))
            continue
        _, stats = solve_milp(build_milp(sc, window, soc_start=soc))
        assert stats.objective == pytest.approx(ostats.objective, abs=1e-6)
