"""Branch-and-bound over the binaries of a :class:`MilpProblem`.

Nodes are LP relaxations solved by :func:`dipps.lp.solve_lp`; a child differs
from its parent only in one binary's bounds, so it is warm-started from the
parent's optimal basis through the dual simplex.
"""

from __future__ import annotations

import heapq
import itertools
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .domain import SolveStats
from .errors import Infeasible, NodeLimitExceeded
from .linearize import MilpProblem
from .lp import Basis, LinearProgram, LpSolution, LpStatus, solve_lp

INT_TOL = 1e-6
IMPROVE_TOL = 1e-9
# open nodes keep their parent's basis inverse for cheap warm starts while
# the total stays under this many bytes
BINV_BUDGET = 512 * 2**20  # bytes of basis inverses kept on open nodes
BOUND_DIGITS = 9  # node bounds equal to this many decimals count as ties


@dataclass(frozen=True)
class MilpOptions:
    gap: float = 1e-6  # absolute
    node_limit: int = 1_000_000
    workers: int = 1


@dataclass
class _Node:
    bound: float
    seq: int
    lb: np.ndarray
    ub: np.ndarray
    basis: Basis | None

    def __lt__(self, other: "_Node") -> bool:
        # best bound first; among (near) equal bounds the newest node, so
        # the search dives instead of sweeping a plateau breadth-first
        return (round(self.bound, BOUND_DIGITS), -self.seq) < (round(other.bound, BOUND_DIGITS), -other.seq)


def _most_fractional(x: np.ndarray, binaries: np.ndarray) -> int | None:
    frac = np.abs(x[binaries] - np.round(x[binaries]))
    i = int(np.argmax(frac))
    if frac[i] <= INT_TOL:
        return None
    return int(binaries[i])  # argmax returns the first maximum: earliest in binary order


def _solve_node(lp: LinearProgram, node: _Node) -> LpSolution:
    return solve_lp(lp.with_bounds(node.lb, node.ub), warm_start=node.basis)


def solve_milp(problem: MilpProblem | LinearProgram, options: MilpOptions = MilpOptions(), binaries=None) -> tuple[np.ndarray, SolveStats]:
    """Optimal solution of the MILP, with binaries snapped to {0, 1}.

    Best-bound node selection, most-fractional branching. An integral node
    is re-solved with its binaries fixed at the snapped values, so the
    returned continuous part is exactly consistent with the binaries.
    With ``workers > 1`` up to that many open nodes are evaluated per
    round in a thread pool; the optimal objective is unchanged but which of
    several optimal solutions is returned may differ from serial mode.

    Raises :class:`Infeasible` or :class:`NodeLimitExceeded`.
    """
    t0 = time.perf_counter()
    if isinstance(problem, MilpProblem):
        lp = problem.to_lp()
        bins = np.asarray(problem.binary_order, dtype=int)
    else:
        lp = problem
        bins = np.asarray(binaries if binaries is not None else [], dtype=int)

    seq = itertools.count()
    heap = [_Node(-np.inf, next(seq), lp.lb.copy(), lp.ub.copy(), None)]
    incumbent: np.ndarray | None = None
    inc_obj = np.inf
    nodes = 0
    iters = 0
    pool = ThreadPoolExecutor(options.workers) if options.workers > 1 else None

    try:
        while heap:
            batch = []
            while heap and len(batch) < max(1, options.workers):
                node = heapq.heappop(heap)
                if node.bound < inc_obj - options.gap:
                    batch.append(node)
            if not batch:
                break
            if nodes + len(batch) > options.node_limit:
                raise NodeLimitExceeded(f"node limit {options.node_limit} reached")
            if pool is None:
                sols = [_solve_node(lp, n) for n in batch]
            else:
                sols = list(pool.map(lambda n: _solve_node(lp, n), batch))
            nodes += len(batch)

            for node, sol in zip(batch, sols):
                iters += sol.iterations
                if sol.status is not LpStatus.OPTIMAL or sol.objective >= inc_obj - options.gap:
                    continue
                j = _most_fractional(sol.x, bins)
                if j is None:
                    lb, ub = node.lb.copy(), node.ub.copy()
                    lb[bins] = ub[bins] = np.round(sol.x[bins])
                    fixed = solve_lp(lp.with_bounds(lb, ub), warm_start=sol.basis)
                    iters += fixed.iterations
                    if fixed.status is LpStatus.OPTIMAL and fixed.objective < inc_obj - IMPROVE_TOL:
                        inc_obj = fixed.objective
                        incumbent = fixed.x.copy()
                        incumbent[bins] = lb[bins]
                    continue
                basis = sol.basis
                held = len({id(n.basis.binv) for n in heap if n.basis is not None and n.basis.binv is not None})
                if (held + 1) * lp.shape[0] ** 2 * 8 > BINV_BUDGET:
                    basis = basis.without_inverse()
                down_ub = node.ub.copy()
                down_ub[j] = 0.0
                up_lb = node.lb.copy()
                up_lb[j] = 1.0
                heapq.heappush(heap, _Node(sol.objective, next(seq), node.lb, down_ub, basis))
                heapq.heappush(heap, _Node(sol.objective, next(seq), up_lb, node.ub, basis))
    finally:
        if pool is not None:
            pool.shutdown()

    if incumbent is None:
        raise Infeasible(f"MILP infeasible after {nodes} nodes")
    open_bound = min((n.bound for n in heap), default=inc_obj)
    stats = SolveStats(
        wall_time=time.perf_counter() - t0,
        nodes_explored=nodes,
        lp_iterations=iters,
        objective=float(inc_obj),
        gap=max(0.0, float(inc_obj - min(open_bound, inc_obj))),
        status="optimal",
    )
    return incumbent, stats
