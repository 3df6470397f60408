"""Predictive power scheduling for a PV + storage microgrid.

The per-window mixed-integer nonlinear model is lifted exactly to a MILP and
solved with an in-house simplex and branch and bound; a receding-horizon
loop rolls the window over the day.
"""

from .domain import (
    DispatchSchedule,
    DispatchStep,
    EfficiencyConvention,
    EssParams,
    MicrogridParams,
    Objective,
    PowerProfile,
    ProfileKind,
    Scenario,
    ScenarioError,
    SellWindowMask,
    SolveStats,
    TariffSchedule,
    TimeGrid,
    validate_scenario,
)
from .errors import DippsError, Infeasible, NodeLimitExceeded, WindowInfeasible, WindowTooLarge
from .horizon import Case, ScenarioConfig, TerminalPolicy, compare_solvers, config_for_case, run_day, sweep_window
from .linearize import build_milp, recover_schedule
from .lp import LinearProgram, solve_lp
from .milp import MilpOptions, solve_milp
from .nonlinear import cost_j1, evaluate_constraints, solve_minlp_enumerate

__version__ = "0.1.0"

__all__ = [
    "Case",
    "DippsError",
    "DispatchSchedule",
    "DispatchStep",
    "EfficiencyConvention",
    "EssParams",
    "Infeasible",
    "LinearProgram",
    "MicrogridParams",
    "MilpOptions",
    "NodeLimitExceeded",
    "Objective",
    "PowerProfile",
    "ProfileKind",
    "Scenario",
    "ScenarioConfig",
    "ScenarioError",
    "SellWindowMask",
    "SolveStats",
    "TariffSchedule",
    "TerminalPolicy",
    "TimeGrid",
    "WindowInfeasible",
    "WindowTooLarge",
    "build_milp",
    "compare_solvers",
    "config_for_case",
    "cost_j1",
    "evaluate_constraints",
    "recover_schedule",
    "run_day",
    "solve_lp",
    "solve_milp",
    "solve_minlp_enumerate",
    "sweep_window",
    "validate_scenario",
]
