"""Dense bounded-variable simplex for small box-bounded linear programs.

Problems have the form::

    min c @ x   s.t.  A_le @ x <= b_le,  A_eq @ x == b_eq,  lb <= x <= ub

Bounds are handled implicitly (never as rows). Every row gets a logical
column; rows whose logical cannot start basic get an artificial column that
phase 1 drives to zero. The final basis can seed a dual-simplex re-solve
after bound changes, which is what branch-and-bound uses.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

FEAS_TOL = 1e-7
OPT_TOL = 1e-7
PIVOT_TOL = 1e-11
# ratio-test entries smaller than this are never pivoted on
RATIO_PIVOT_TOL = 1e-9
REFACTOR_EVERY = 50
RESIDUAL_TOL = 1e-9  # row residual that triggers a fresh factorization
DEGENERATE_SWITCH = 30


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"


class NumericalBreakdown(ArithmeticError):
    """The basis became (near-)singular; the problem needs rescaling."""


@dataclass
class LinearProgram:
    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    is_eq: np.ndarray
    lb: np.ndarray
    ub: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        n = self.c.size
        self.A = np.asarray(self.A, dtype=float).reshape(-1, n)
        self.b = np.asarray(self.b, dtype=float).reshape(-1)
        self.is_eq = np.asarray(self.is_eq, dtype=bool).reshape(-1)
        self.lb = np.asarray(self.lb, dtype=float)
        self.ub = np.asarray(self.ub, dtype=float)
        m = self.A.shape[0]
        if self.b.size != m or self.is_eq.size != m:
            raise ValueError("row dimensions disagree")
        if self.lb.size != n or self.ub.size != n:
            raise ValueError("bound dimensions disagree")
        if not (np.all(np.isfinite(self.lb)) and np.all(np.isfinite(self.ub))):
            raise ValueError("all variable bounds must be finite")

    @classmethod
    def build(cls, c, A_le=None, b_le=None, A_eq=None, b_eq=None, lb=None, ub=None) -> "LinearProgram":
        c = np.asarray(c, dtype=float)
        n = c.size
        blocks, rhs, eq = [], [], []
        if A_le is not None and len(A_le):
            A_le = np.asarray(A_le, dtype=float).reshape(-1, n)
            blocks.append(A_le)
            rhs.append(np.asarray(b_le, dtype=float).reshape(-1))
            eq.append(np.zeros(A_le.shape[0], dtype=bool))
        if A_eq is not None and len(A_eq):
            A_eq = np.asarray(A_eq, dtype=float).reshape(-1, n)
            blocks.append(A_eq)
            rhs.append(np.asarray(b_eq, dtype=float).reshape(-1))
            eq.append(np.ones(A_eq.shape[0], dtype=bool))
        A = np.vstack(blocks) if blocks else np.zeros((0, n))
        b = np.concatenate(rhs) if rhs else np.zeros(0)
        is_eq = np.concatenate(eq) if eq else np.zeros(0, dtype=bool)
        lb = np.zeros(n) if lb is None else lb
        if ub is None:
            raise ValueError("upper bounds are required")
        return cls(c, A, b, is_eq, lb, ub)

    @property
    def shape(self) -> tuple[int, int]:
        return self.A.shape

    def with_bounds(self, lb: np.ndarray, ub: np.ndarray) -> "LinearProgram":
        lp = LinearProgram(self.c, self.A, self.b, self.is_eq, lb, ub)
        lp._pattern = self.pattern()  # rows are shared, so is their sparsity
        return lp

    def pattern(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Nonzeros of ``A`` as ``(rows, cols, values)`` in column-major order (cached)."""
        cached = getattr(self, "_pattern", None)
        if cached is None:
            r, c = np.nonzero(self.A)
            order = np.lexsort((r, c))
            r, c = r[order], c[order]
            cached = self._pattern = (r, c, self.A[r, c])
        return cached

    def empty_rows(self) -> np.ndarray:
        mask = np.ones(self.A.shape[0], dtype=bool)
        mask[self.pattern()[0]] = False
        return mask

    def residual(self, x: np.ndarray) -> float:
        """Largest primal infeasibility of ``x`` (rows and bounds)."""
        x = np.asarray(x, dtype=float)
        act = self.A @ x - self.b
        row = np.where(self.is_eq, np.abs(act), np.maximum(act, 0.0))
        bnd = np.maximum(self.lb - x, 0.0).max(initial=0.0), np.maximum(x - self.ub, 0.0).max(initial=0.0)
        return float(max(row.max(initial=0.0), *bnd))


@dataclass
class Basis:
    """Snapshot of a simplex basis, reusable on an LP differing only in bounds."""

    basic: np.ndarray
    at_ub: np.ndarray
    art_rows: np.ndarray
    art_signs: np.ndarray
    binv: np.ndarray | None = field(default=None, repr=False)  # inverse of the basis matrix, if kept

    def without_inverse(self) -> "Basis":
        return Basis(self.basic, self.at_ub, self.art_rows, self.art_signs)


@dataclass
class LpSolution:
    status: LpStatus
    x: np.ndarray | None = None
    objective: float = float("nan")
    iterations: int = 0
    duals: np.ndarray | None = None
    basis: Basis | None = field(default=None, repr=False)


class _Tableau:
    """Working state: full column set ``[structural | logical | artificial]``."""

    def __init__(self, lp: LinearProgram, art_rows: np.ndarray, art_signs: np.ndarray):
        m, n = lp.shape
        k = art_rows.size
        self.m, self.n = m, n
        self.A = lp.A  # structural block only; unit columns are implicit
        # sparse triplets of the full column set [structural | logical | artificial]
        r, c, v = lp.pattern()
        self.sp_row = np.concatenate([r, np.arange(m), art_rows]).astype(int)
        self.sp_col = np.concatenate([c, n + np.arange(m), n + m + np.arange(k)]).astype(int)
        self.sp_val = np.concatenate([v, np.ones(m), art_signs]).astype(float)
        self.col_ptr = np.searchsorted(self.sp_col, np.arange(n + m + k + 1))
        self.b = lp.b
        self.lb = np.concatenate([lp.lb, np.zeros(m + k)])
        self.ub = np.concatenate([lp.ub, np.where(lp.is_eq, 0.0, np.inf), np.full(k, np.inf)])
        self.c = np.concatenate([lp.c, np.zeros(m + k)])
        self.art = np.arange(n + m, n + m + k)
        # row and sign of each unit column (logicals and artificials)
        self.unit_row = np.concatenate([np.full(n, -1), np.arange(m), art_rows]).astype(int)
        self.unit_sign = np.concatenate([np.zeros(n), np.ones(m), art_signs])
        self.art_rows, self.art_signs = art_rows, art_signs
        self.ncols = n + m + k
        self.basic = np.zeros(m, dtype=int)
        self.is_basic = np.zeros(self.ncols, dtype=bool)
        self.at_ub = np.zeros(self.ncols, dtype=bool)
        self.x = np.zeros(self.ncols)
        self.Binv = np.eye(m)
        self.iterations = 0
        self._since_refactor = 0

    # -- basis bookkeeping -------------------------------------------------
    def set_basis(self, basic: np.ndarray, at_ub: np.ndarray, binv: np.ndarray | None = None) -> None:
        self.basic = np.array(basic, dtype=int)
        self.is_basic[:] = False
        self.is_basic[self.basic] = True
        self.at_ub = np.array(at_ub, dtype=bool) & np.isfinite(self.ub) & ~self.is_basic
        if binv is None:
            self.refactor()
            return
        self.Binv = binv.copy()
        self.x = self.nonbasic_values()
        if self.m:
            self.x[self.basic] = self.Binv @ (self.b - self.times_x(self.x))
        self._since_refactor = 0

    def nonbasic_values(self) -> np.ndarray:
        xn = np.where(self.at_ub, self.ub, self.lb)
        xn[self.is_basic] = 0.0
        return xn

    def refactor(self) -> None:
        """Recompute ``B^-1`` and the basic values from scratch.

        Logical and artificial columns are signed unit vectors, so only the
        block of structural basic columns on the rows they leave uncovered
        is inverted densely.
        """
        m = self.m
        if m == 0:
            self.Binv = np.zeros((0, 0))
            self.x = self.nonbasic_values()
            self._since_refactor = 0
            return
        cols = self.basic
        unit = cols >= self.n
        pos_u = np.flatnonzero(unit)
        pos_s = np.flatnonzero(~unit)
        rows_u = self.unit_row[cols[pos_u]]
        sign_u = self.unit_sign[cols[pos_u]]
        covered = np.zeros(m, dtype=bool)
        covered[rows_u] = True
        if np.count_nonzero(covered) != pos_u.size:
            raise NumericalBreakdown("singular basis")
        free_rows = np.flatnonzero(~covered)
        M = self.A[np.ix_(free_rows, cols[pos_s])]
        try:
            Minv = np.linalg.inv(M) if M.size else M.T
        except np.linalg.LinAlgError as exc:
            raise NumericalBreakdown("singular basis") from exc
        if not np.all(np.isfinite(Minv)):
            raise NumericalBreakdown("singular basis")
        Binv = np.zeros((m, m))
        Binv[np.ix_(pos_s, free_rows)] = Minv
        Binv[pos_u, rows_u] = sign_u
        if pos_s.size:
            coupling = self.A[np.ix_(rows_u, cols[pos_s])] @ Minv
            Binv[np.ix_(pos_u, free_rows)] = -sign_u[:, None] * coupling
        self.Binv = Binv
        xn = self.nonbasic_values()
        self.x = xn
        self.x[self.basic] = self.Binv @ (self.b - self.times_x(xn))
        self._since_refactor = 0

    def pivot(self, r: int, j: int, alpha: np.ndarray, leave_at_ub: bool = False) -> None:
        piv = alpha[r]
        if abs(piv) < PIVOT_TOL:
            raise NumericalBreakdown(f"pivot {piv:.3e} below tolerance")
        row = self.Binv[r] / piv
        nz = np.flatnonzero(alpha)
        self.Binv[nz] -= alpha[nz, None] * row
        self.Binv[r] = row
        leaving = self.basic[r]
        self.is_basic[leaving] = False
        self.basic[r] = j
        self.is_basic[j] = True
        self.at_ub[j] = False
        self.at_ub[leaving] = leave_at_ub
        self.x[leaving] = self.ub[leaving] if leave_at_ub else self.lb[leaving]
        self.iterations += 1
        self._since_refactor += 1
        if self._since_refactor >= REFACTOR_EVERY:
            self.refactor()

    def recompute_x(self) -> None:
        xn = self.nonbasic_values()
        xn[self.basic] = self.Binv @ (self.b - self.times_x(xn))
        self.x = xn

    def row_residual(self) -> float:
        """Largest violation of ``A x = b`` at the current point."""
        return float(np.max(np.abs(self.times_x(self.x) - self.b), initial=0.0))

    def row_times_A(self, v: np.ndarray) -> np.ndarray:
        """``v @ A`` over the full column set."""
        return np.bincount(self.sp_col, weights=v[self.sp_row] * self.sp_val, minlength=self.ncols)

    def times_x(self, x: np.ndarray) -> np.ndarray:
        """``A @ x`` over the full column set."""
        return np.bincount(self.sp_row, weights=self.sp_val * x[self.sp_col], minlength=self.m)

    def column(self, j: int) -> np.ndarray:
        """``B^-1 a_j``."""
        lo, hi = self.col_ptr[j], self.col_ptr[j + 1]
        return self.Binv[:, self.sp_row[lo:hi]] @ self.sp_val[lo:hi]

    def reduced_costs(self, cost: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        y = cost[self.basic] @ self.Binv if self.m else np.zeros(0)
        d = cost - self.row_times_A(y)
        d[self.basic] = 0.0
        return y, d

    # -- primal simplex ----------------------------------------------------
    def primal(self, cost: np.ndarray, max_iter: int) -> LpStatus:
        degenerate = 0
        for _ in range(max_iter):
            _, d = self.reduced_costs(cost)
            movable = ~self.is_basic & (self.ub > self.lb)
            inc = movable & ~self.at_ub & (d < -OPT_TOL)
            dec = movable & self.at_ub & (d > OPT_TOL)
            elig = inc | dec
            if not elig.any():
                return LpStatus.OPTIMAL
            bland = degenerate >= DEGENERATE_SWITCH
            if bland:
                j = int(np.flatnonzero(elig)[0])
            else:
                j = int(np.argmax(np.where(elig, np.abs(d), -1.0)))
            direction = 1.0 if inc[j] else -1.0
            alpha = self.column(j) if self.m else np.zeros(0)
            delta = -direction * alpha
            xb = self.x[self.basic]
            lbb, ubb = self.lb[self.basic], self.ub[self.basic]
            ratios = np.full(self.m, np.inf)
            down = delta < -RATIO_PIVOT_TOL
            up = (delta > RATIO_PIVOT_TOL) & np.isfinite(ubb)
            ratios[down] = (xb[down] - lbb[down]) / -delta[down]
            ratios[up] = (ubb[up] - xb[up]) / delta[up]
            np.maximum(ratios, 0.0, out=ratios)
            t_flip = self.ub[j] - self.lb[j]
            t_min = ratios.min(initial=np.inf)
            if not np.isfinite(t_min) and not np.isfinite(t_flip):
                return LpStatus.UNBOUNDED
            if t_flip <= t_min:
                self.x[self.basic] = xb + delta * t_flip
                self.at_ub[j] = not self.at_ub[j]
                self.x[j] = self.ub[j] if self.at_ub[j] else self.lb[j]
                self.iterations += 1
                degenerate = 0
                continue
            ties = np.flatnonzero(ratios <= t_min + 1e-12)
            if bland:
                r = int(ties[np.argmin(self.basic[ties])])
            else:
                r = int(ties[np.argmax(np.abs(alpha[ties]))])
            self.x[self.basic] = xb + delta * t_min
            self.x[j] = self.x[j] + direction * t_min
            self.pivot(r, j, alpha, leave_at_ub=bool(delta[r] > 0))
            degenerate = degenerate + 1 if t_min <= 1e-12 else 0
        raise NumericalBreakdown("primal simplex iteration limit reached")

    # -- dual simplex ------------------------------------------------------
    def dual_feasible(self, cost: np.ndarray) -> bool:
        _, d = self.reduced_costs(cost)
        movable = ~self.is_basic & (self.ub > self.lb)
        bad = movable & ((~self.at_ub & (d < -OPT_TOL)) | (self.at_ub & (d > OPT_TOL)))
        return not bad.any()

    def dual(self, cost: np.ndarray, max_iter: int) -> LpStatus:
        for _ in range(max_iter):
            xb = self.x[self.basic]
            lbb, ubb = self.lb[self.basic], self.ub[self.basic]
            below = lbb - xb
            above = xb - ubb
            viol = np.maximum(below, above)
            r = int(np.argmax(viol)) if self.m else 0
            if not self.m or viol[r] <= FEAS_TOL:
                return LpStatus.OPTIMAL
            to_lower = below[r] > above[r]
            _, d = self.reduced_costs(cost)
            row = self.row_times_A(self.Binv[r])
            movable = ~self.is_basic & (self.ub > self.lb)
            if to_lower:
                cand = movable & ((~self.at_ub & (row < -RATIO_PIVOT_TOL)) | (self.at_ub & (row > RATIO_PIVOT_TOL)))
            else:
                cand = movable & ((~self.at_ub & (row > RATIO_PIVOT_TOL)) | (self.at_ub & (row < -RATIO_PIVOT_TOL)))
            if not cand.any():
                return LpStatus.INFEASIBLE
            idx = np.flatnonzero(cand)
            ratios = np.abs(d[idx]) / np.abs(row[idx])
            best = ratios.min()
            ties = idx[ratios <= best + 1e-12]
            j = int(ties[np.argmax(np.abs(row[ties]))])
            target = lbb[r] if to_lower else ubb[r]
            step = (xb[r] - target) / row[j]
            alpha = self.column(j)
            self.x[self.basic] = xb - alpha * step
            self.x[j] += step
            self.pivot(r, j, alpha, leave_at_ub=not to_lower)
        raise NumericalBreakdown("dual simplex iteration limit reached")

    def max_infeasibility(self) -> float:
        x = self.x
        return float(max(np.max(self.lb - x, initial=0.0), np.max(x - self.ub, initial=0.0)))

    def drive_out_artificials(self) -> None:
        """Pivot zero-valued artificials out of the basis where a pivot exists."""
        art = set(self.art.tolist())
        for r in range(self.m):
            if self.basic[r] not in art:
                continue
            row = self.row_times_A(self.Binv[r])
            cand = ~self.is_basic & (self.ub > self.lb) & (np.abs(row) > 1e-7)
            cand[self.art] = False
            if not cand.any():
                continue
            j = int(np.flatnonzero(cand)[np.argmax(np.abs(row[cand]))])
            alpha = self.column(j)
            self.pivot(r, j, alpha)
            self.refactor()

    def snapshot(self) -> Basis:
        return Basis(self.basic.copy(), self.at_ub.copy(), self.art_rows.copy(), self.art_signs.copy(), self.Binv.copy())


def _drop_empty_rows(lp: LinearProgram) -> LinearProgram | None:
    """Remove all-zero rows; ``None`` if one of them is unsatisfiable."""
    empty = lp.empty_rows()
    if not empty.any():
        return lp
    bad = empty & ((lp.is_eq & (np.abs(lp.b) > FEAS_TOL)) | (~lp.is_eq & (lp.b < -FEAS_TOL)))
    if bad.any():
        return None
    keep = ~empty
    return LinearProgram(lp.c, lp.A[keep], lp.b[keep], lp.is_eq[keep], lp.lb, lp.ub)


def _finish(tab: _Tableau, lp: LinearProgram, status: LpStatus) -> LpSolution:
    if status is not LpStatus.OPTIMAL:
        return LpSolution(status, iterations=tab.iterations)
    x = tab.x[: tab.n].copy()
    y, _ = tab.reduced_costs(tab.c)
    return LpSolution(
        LpStatus.OPTIMAL,
        x=x,
        objective=float(lp.c @ x),
        iterations=tab.iterations,
        duals=y,
        basis=tab.snapshot(),
    )


def _refresh(tab: _Tableau, force: bool = False) -> None:
    """Recompute the basic values; refactor if the row residual shows drift."""
    if not tab._since_refactor and not force:
        return
    tab.recompute_x()
    if force or tab.row_residual() > RESIDUAL_TOL:
        tab.refactor()


def _polish(tab: _Tableau, max_iter: int) -> LpStatus:
    """Repair small drift until primal and dual feasible."""
    for attempt in range(3):
        _refresh(tab, force=attempt > 0)
        if tab.max_infeasibility() > FEAS_TOL:
            status = tab.dual(tab.c, max_iter)
            if status is not LpStatus.OPTIMAL:
                return status
        status = tab.primal(tab.c, max_iter)
        if status is not LpStatus.OPTIMAL:
            return status
        _refresh(tab, force=attempt > 0)
        if tab.max_infeasibility() <= FEAS_TOL and tab.dual_feasible(tab.c):
            return LpStatus.OPTIMAL
    raise NumericalBreakdown("could not reach a clean optimal basis")


def _cold_start(lp: LinearProgram, max_iter: int) -> LpSolution:
    m, n = lp.shape
    xn = lp.lb.copy()
    r = lp.b - lp.A @ xn
    needs_art = lp.is_eq | (r < 0)
    art_rows = np.flatnonzero(needs_art)
    art_signs = np.where(r[art_rows] >= 0, 1.0, -1.0)
    tab = _Tableau(lp, art_rows, art_signs)
    basic = np.arange(n, n + m)
    basic[art_rows] = tab.art
    tab.set_basis(basic, np.zeros(tab.ncols, dtype=bool))

    if art_rows.size:
        phase1 = np.zeros(tab.ncols)
        phase1[tab.art] = 1.0
        status = tab.primal(phase1, max_iter)
        if status is not LpStatus.OPTIMAL:
            raise NumericalBreakdown("phase 1 did not terminate at an optimum")
        tab.refactor()
        if float(tab.x[tab.art].sum()) > FEAS_TOL * max(1.0, m):
            return LpSolution(LpStatus.INFEASIBLE, iterations=tab.iterations)
        tab.ub[tab.art] = 0.0
        tab.x[tab.art] = np.minimum(tab.x[tab.art], 0.0)
        tab.drive_out_artificials()
        tab.refactor()

    status = tab.primal(tab.c, max_iter)
    if status is LpStatus.OPTIMAL:
        status = _polish(tab, max_iter)
    return _finish(tab, lp, status)


def _warm_start(lp: LinearProgram, basis: Basis, max_iter: int) -> LpSolution | None:
    tab = _Tableau(lp, basis.art_rows, basis.art_signs)
    tab.ub[tab.art] = 0.0
    try:
        tab.set_basis(basis.basic, basis.at_ub, basis.binv)
    except NumericalBreakdown:
        return None
    if not tab.dual_feasible(tab.c):
        return None
    status = tab.dual(tab.c, max_iter)
    if status is LpStatus.OPTIMAL:
        status = _polish(tab, max_iter)
    return _finish(tab, lp, status)


def solve_lp(lp: LinearProgram, warm_start: Basis | None = None, max_iter: int | None = None) -> LpSolution:
    """Solve ``lp`` to optimality, or classify it as infeasible/unbounded.

    ``warm_start`` is a basis from a previous solve of an LP with the same
    rows and objective; only bounds may differ. Deterministic: pivoting uses
    Dantzig pricing with lowest-index ties, switching to Bland's rule after
    a run of degenerate pivots.
    """
    reduced = _drop_empty_rows(lp)
    if reduced is None:
        return LpSolution(LpStatus.INFEASIBLE)
    if np.any(lp.lb > lp.ub + FEAS_TOL):
        return LpSolution(LpStatus.INFEASIBLE)
    m, n = reduced.shape
    if max_iter is None:
        max_iter = 50 * (m + n) + 1000
    if warm_start is not None and reduced is lp:
        sol = _warm_start(lp, warm_start, max_iter)
        if sol is not None:
            return sol
    return _cold_start(reduced, max_iter)


def dual_bound(lp: LinearProgram, duals: np.ndarray) -> float:
    """Lagrangian lower bound on the optimum given row multipliers ``duals``.

    For a minimisation with ``<=`` rows the multipliers must be <= 0; the
    bound is ``b @ y`` plus the best box term of the reduced costs.
    """
    y = np.asarray(duals, dtype=float)
    y = np.where(lp.is_eq, y, np.minimum(y, 0.0))
    d = lp.c - y @ lp.A
    return float(lp.b @ y + np.sum(np.where(d >= 0, d * lp.lb, d * lp.ub)))
