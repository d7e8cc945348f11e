"""
Bounded-variable revised simplex.

Nonbasic columns sit at one of their bounds; the basis inverse is kept explicitly and
updated by rank-one pivots, with a fresh factorization every ``REFACTOR_EVERY`` pivots.
A cold solve runs phase 1 on the sum of artificial columns, then the primal simplex on the
model objective. A warm solve starts from an optimal basis of the same model under looser
column bounds: that basis stays dual feasible, so a bounded dual simplex restores primal
feasibility and a primal pass cleans up.
"""

import dataclasses
from enum import StrEnum

import numpy as np
import scipy.sparse as sp
from loguru import logger

from stockshift.model import MilpModel, RowSense

FEASIBILITY_TOL = 1e-7
OPTIMALITY_TOL = 1e-7
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 50
WARM_DUAL_TOL = 1e-6
WARM_ITERATIONS_PER_COLUMN = 10


class LpStatus(StrEnum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    UNBOUNDED = "unbounded"
    ITERATION_LIMIT = "iteration_limit"
    NUMERICAL = "numerical"
    """Basis became singular or the final point misses the feasibility tolerance"""


class _Layout:
    """Column layout ``[A | slacks | artificials]`` shared by every solve started from it."""

    def __init__(self, model: MilpModel, lower: np.ndarray):
        n = model.n_cols
        m = model.n_rows
        A = sp.csc_matrix(model.A, dtype=float)
        b = np.asarray(model.rhs, dtype=float)
        residual = b - (A @ lower if n else np.zeros(m))

        slack_rows, slack_coefs = [], []
        basis = np.full(m, -1, dtype=np.int64)
        for r, sense in enumerate(model.senses):
            if sense == RowSense.EQ:
                continue
            coef = 1.0 if sense == RowSense.LE else -1.0
            slack_rows.append(r)
            slack_coefs.append(coef)
            if residual[r] * coef >= 0.0:
                basis[r] = n + len(slack_rows) - 1
        n_slack = len(slack_rows)

        art_rows = [r for r in range(m) if basis[r] < 0]
        art_coefs = [1.0 if residual[r] >= 0.0 else -1.0 for r in art_rows]
        for k, r in enumerate(art_rows):
            basis[r] = n + n_slack + k
        n_art = len(art_rows)

        slack_block = sp.csc_matrix((slack_coefs, (slack_rows, range(n_slack))), shape=(m, n_slack))
        art_block = sp.csc_matrix((art_coefs, (art_rows, range(n_art))), shape=(m, n_art))
        self.A = sp.hstack([A, slack_block, art_block], format="csc")
        self.AT = self.A.T.tocsr()
        self.b = b
        self.m = m
        self.n_struct = n
        self.n_slack = n_slack
        self.n_art = n_art
        self.initial_basis = basis
        self.cost = np.zeros(self.total)
        self.cost[:n] = model.c

    @property
    def total(self) -> int:
        return self.n_struct + self.n_slack + self.n_art

    @property
    def artificial_slice(self) -> slice:
        return slice(self.n_struct + self.n_slack, self.total)


@dataclasses.dataclass(frozen=True, eq=False)
class LpBasis:
    """Optimal basis of a finished solve: the basic column of each row and the nonbasic columns at their upper bound."""

    layout: _Layout
    columns: np.ndarray
    at_upper: np.ndarray


@dataclasses.dataclass(frozen=True)
class LpResult:
    status: LpStatus
    x: np.ndarray | None
    objective: float
    iterations: int
    basis: LpBasis | None = None
    message: str = ""
    warm_started: bool = False

    @property
    def is_optimal(self) -> bool:
        return self.status is LpStatus.OPTIMAL


class _Breakdown(Exception):  # noqa: N818
    pass


class _Tableau:
    """Working state of one simplex solve over a layout."""

    def __init__(
        self,
        layout: _Layout,
        lower: np.ndarray,
        upper: np.ndarray,
        basis: np.ndarray,
        at_upper: np.ndarray | None = None,
        *,
        artificials_open: bool,
    ):
        self.layout = layout
        self.A = layout.A
        self.AT = layout.AT
        self.b = layout.b
        self.m = layout.m
        n_extra = layout.n_slack + layout.n_art
        art_upper = np.inf if artificials_open else 0.0
        self.lower = np.concatenate([lower, np.zeros(n_extra)])
        self.upper = np.concatenate([upper, np.full(layout.n_slack, np.inf), np.full(layout.n_art, art_upper)])
        self.basis = np.array(basis, dtype=np.int64)
        self.is_basic = np.zeros(layout.total, dtype=bool)
        self.is_basic[self.basis] = True
        self.at_upper = np.zeros(layout.total, dtype=bool)
        if at_upper is not None:
            self.at_upper[at_upper] = True
        self.at_upper &= ~self.is_basic & np.isfinite(self.upper)
        self.x = np.where(self.at_upper, self.upper, self.lower)
        self.iterations = 0
        self.since_refactor = 0
        self.B_inv = np.zeros((self.m, self.m))
        self.refactor()

    def set_structural_bounds(self, lower: np.ndarray, upper: np.ndarray) -> None:
        n = self.layout.n_struct
        self.lower[:n] = lower
        self.upper[:n] = upper
        self.at_upper &= np.isfinite(self.upper)
        nonbasic = ~self.is_basic
        self.x[nonbasic] = np.where(self.at_upper, self.upper, self.lower)[nonbasic]
        self.iterations = 0
        self.basic_values()

    def basic_values(self) -> None:
        if self.m == 0:
            return
        nonbasic_x = np.where(self.is_basic, 0.0, self.x)
        self.x[self.basis] = self.B_inv @ (self.b - self.A @ nonbasic_x)

    def refactor(self) -> None:
        if self.m == 0:
            return
        B = self.A[:, self.basis].toarray()
        try:
            self.B_inv = np.linalg.inv(B)
        except np.linalg.LinAlgError as exc:
            raise _Breakdown(str(exc)) from exc
        self.since_refactor = 0
        self.basic_values()

    def reduced_costs(self, cost: np.ndarray) -> np.ndarray:
        if self.m == 0:
            return cost.copy()
        return cost - self.AT @ (cost[self.basis] @ self.B_inv)

    def snapshot(self) -> LpBasis:
        return LpBasis(self.layout, self.basis.copy(), np.flatnonzero(self.at_upper & ~self.is_basic))

    def _pivot(self, leaving: int, entering: int, alpha: np.ndarray) -> None:
        pivot = alpha[leaving]
        if abs(pivot) < PIVOT_TOL:
            msg = f"pivot {pivot:.3e} below tolerance"
            raise _Breakdown(msg)
        self.is_basic[entering] = True
        self.at_upper[entering] = False
        self.basis[leaving] = entering
        row = self.B_inv[leaving] / pivot
        self.B_inv -= np.outer(alpha, row)
        self.B_inv[leaving] = row
        self.since_refactor += 1
        if self.since_refactor >= REFACTOR_EVERY:
            self.refactor()

    def run(self, cost: np.ndarray, max_iterations: int) -> LpStatus:
        """Primal simplex from a primal feasible basis."""
        m = self.m
        stall_limit = 10 * (m + len(cost))
        stalled = 0
        bland = False
        nonfixed = self.upper - self.lower > FEASIBILITY_TOL
        while True:
            if self.iterations >= max_iterations:
                return LpStatus.ITERATION_LIMIT
            d = self.reduced_costs(cost)
            score = np.where(self.at_upper, d, -d)
            eligible = (~self.is_basic) & nonfixed & (score > OPTIMALITY_TOL)
            if not eligible.any():
                return LpStatus.OPTIMAL
            if bland:
                entering = int(np.flatnonzero(eligible)[0])
            else:
                entering = int(np.argmax(np.where(eligible, score, -np.inf)))
            direction = -1.0 if self.at_upper[entering] else 1.0

            column = self.A[:, entering].toarray().ravel()
            alpha = self.B_inv @ column if m else np.zeros(0)
            rate = -direction * alpha

            step = self.upper[entering] - self.lower[entering]
            leaving = -1
            x_basic = self.x[self.basis]
            lo_basic = self.lower[self.basis]
            up_basic = self.upper[self.basis]
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.full(m, np.inf)
                dec = rate < -PIVOT_TOL
                inc = rate > PIVOT_TOL
                ratios[dec] = (x_basic[dec] - lo_basic[dec]) / -rate[dec]
                ratios[inc] = (up_basic[inc] - x_basic[inc]) / rate[inc]
            ratios = np.maximum(ratios, 0.0)
            if m:
                best = ratios.min()
                if best < step:
                    ties = np.flatnonzero(ratios <= best + 1e-12)
                    if bland:
                        leaving = int(ties[np.argmin(self.basis[ties])])
                    else:
                        leaving = int(ties[np.argmax(np.abs(alpha[ties]))])
                    step = best
            if not np.isfinite(step):
                return LpStatus.UNBOUNDED

            before = float(cost @ self.x)
            self.x[entering] += direction * step
            if m:
                self.x[self.basis] += rate * step
            self.iterations += 1

            if leaving < 0:
                self.at_upper[entering] = not self.at_upper[entering]
                self.x[entering] = self.upper[entering] if self.at_upper[entering] else self.lower[entering]
            else:
                out = int(self.basis[leaving])
                to_upper = rate[leaving] > 0
                self.x[out] = self.upper[out] if to_upper else self.lower[out]
                self.at_upper[out] = to_upper
                self.is_basic[out] = False
                self._pivot(leaving, entering, alpha)

            if float(cost @ self.x) < before - 1e-12:
                stalled = 0
            else:
                stalled += 1
                if not bland and stalled > stall_limit:
                    logger.trace(f"simplex switching to Bland's rule after {stalled} stalled pivots")
                    bland = True

    def dual_feasible(self, cost: np.ndarray) -> bool:
        d = self.reduced_costs(cost)
        nonfixed = self.upper - self.lower > FEASIBILITY_TOL
        wrong = np.where(self.at_upper, d, -d)
        return not ((~self.is_basic) & nonfixed & (wrong > WARM_DUAL_TOL)).any()

    def dual(self, cost: np.ndarray, max_iterations: int) -> LpStatus:
        """
        Bounded dual simplex from a dual feasible basis. OPTIMAL means every basic value is back
        within its bounds; INFEASIBLE means some violated row admits no entering column.
        """
        m = self.m
        nonfixed = self.upper - self.lower > FEASIBILITY_TOL
        while True:
            if m == 0:
                return LpStatus.OPTIMAL
            x_basic = self.x[self.basis]
            below = self.lower[self.basis] - x_basic
            above = x_basic - self.upper[self.basis]
            violation = np.maximum(below, above)
            r = int(np.argmax(violation))
            if violation[r] <= FEASIBILITY_TOL:
                return LpStatus.OPTIMAL
            if self.iterations >= max_iterations:
                return LpStatus.ITERATION_LIMIT

            increase = bool(below[r] > above[r])
            d = self.reduced_costs(cost)
            row = self.AT @ self.B_inv[r]
            signed = row if increase else -row
            # the entering column must move the leaving value toward its violated bound
            eligible = (~self.is_basic) & nonfixed & np.where(self.at_upper, signed > PIVOT_TOL, signed < -PIVOT_TOL)
            if not eligible.any():
                return LpStatus.INFEASIBLE
            with np.errstate(divide="ignore", invalid="ignore"):
                ratios = np.where(eligible, np.abs(d) / np.abs(row), np.inf)
            best = ratios.min()
            ties = np.flatnonzero(ratios <= best + 1e-12)
            entering = int(ties[np.argmax(np.abs(row[ties]))])

            out = int(self.basis[r])
            self.is_basic[out] = False
            self.at_upper[out] = not increase
            self.x[out] = self.lower[out] if increase else self.upper[out]
            column = self.A[:, entering].toarray().ravel()
            self._pivot(r, entering, self.B_inv @ column)
            self.iterations += 1
            if self.since_refactor:
                self.basic_values()


def _violation_masks(model: MilpModel) -> dict[RowSense, np.ndarray]:
    return {sense: np.array([s == sense for s in model.senses], dtype=bool) for sense in RowSense}


def _max_violation(
    model: MilpModel, masks: dict[RowSense, np.ndarray], x: np.ndarray, lower: np.ndarray, upper: np.ndarray
) -> float:
    activity = model.A @ x if model.n_rows else np.zeros(0)
    worst = 0.0
    for sense, code in ((RowSense.LE, 1.0), (RowSense.GE, -1.0)):
        mask = masks[sense]
        if mask.any():
            worst = max(worst, float(np.max(code * (activity[mask] - model.rhs[mask]))))
    mask = masks[RowSense.EQ]
    if mask.any():
        worst = max(worst, float(np.max(np.abs(activity[mask] - model.rhs[mask]))))
    if len(x):
        worst = max(worst, float(np.max(lower - x)), float(np.max(x - upper)))
    return worst


class LpSession:
    """
    Repeated LP solves of one model under changing column bounds. A solve given the basis of
    an earlier one (a branch-and-bound parent) starts from it and falls back to a cold solve
    whenever the warm start breaks down.
    """

    def __init__(self, model: MilpModel, max_iterations: int = 200_000):
        self.model = model
        self.max_iterations = max_iterations
        self._masks = _violation_masks(model)
        self._last_basis: LpBasis | None = None
        self._last_tableau: _Tableau | None = None

    def solve(
        self, lower: np.ndarray | None = None, upper: np.ndarray | None = None, start: LpBasis | None = None
    ) -> LpResult:
        model = self.model
        lower = np.array(model.lower if lower is None else lower, dtype=float)
        upper = np.array(model.upper if upper is None else upper, dtype=float)
        if (lower > upper + FEASIBILITY_TOL).any():
            return LpResult(LpStatus.INFEASIBLE, None, np.inf, 0, message="crossed column bounds")
        if not np.isfinite(lower).all():
            msg = "solve_lp requires finite lower bounds"
            raise ValueError(msg)
        upper = np.maximum(upper, lower)

        if start is not None and model.n_rows:
            result = self._warm(start, lower, upper)
            if result is not None:
                return result
            logger.trace(f"{model.name}: warm start abandoned, solving from scratch")
        return self._cold(lower, upper)

    def _remember(self, result: LpResult, tableau: _Tableau) -> LpResult:
        if result.is_optimal:
            self._last_basis, self._last_tableau = result.basis, tableau
        else:
            self._last_basis, self._last_tableau = None, None
        return result

    def _warm(self, start: LpBasis, lower: np.ndarray, upper: np.ndarray) -> LpResult | None:
        layout = start.layout
        try:
            if start is self._last_basis and self._last_tableau is not None:
                tableau = self._last_tableau
                tableau.set_structural_bounds(lower, upper)
            else:
                tableau = _Tableau(layout, lower, upper, start.columns, start.at_upper, artificials_open=False)
            self._last_basis, self._last_tableau = None, None
            if not tableau.dual_feasible(layout.cost):
                return None
            status = tableau.dual(layout.cost, min(self.max_iterations, WARM_ITERATIONS_PER_COLUMN * layout.total))
            if status is LpStatus.INFEASIBLE:
                return LpResult(LpStatus.INFEASIBLE, None, np.inf, tableau.iterations, warm_started=True)
            if status is not LpStatus.OPTIMAL:
                return None
            if tableau.run(layout.cost, self.max_iterations) is not LpStatus.OPTIMAL:
                return None
            tableau.refactor()
        except _Breakdown as exc:
            logger.trace(f"{self.model.name}: warm start broke down: {exc}")
            return None
        result = self._finish(tableau, lower, upper, warm=True)
        if not result.is_optimal:
            return None
        return self._remember(result, tableau)

    def _cold(self, lower: np.ndarray, upper: np.ndarray) -> LpResult:
        model = self.model
        layout = _Layout(model, lower)
        tableau: _Tableau | None = None
        try:
            tableau = _Tableau(layout, lower, upper, layout.initial_basis, artificials_open=True)
            if layout.n_art:
                phase1 = np.zeros(layout.total)
                phase1[layout.artificial_slice] = 1.0
                status = tableau.run(phase1, self.max_iterations)
                if status is not LpStatus.OPTIMAL:
                    return LpResult(status, None, np.inf, tableau.iterations, message="phase 1 did not finish")
                tableau.refactor()
                infeasibility = float(tableau.x[layout.artificial_slice].sum())
                if infeasibility > FEASIBILITY_TOL * max(1.0, float(np.abs(model.rhs).max(initial=0.0))):
                    logger.trace(f"LP infeasible, phase 1 residual {infeasibility:.3e}")
                    return LpResult(LpStatus.INFEASIBLE, None, np.inf, tableau.iterations, message="phase 1 residual")
                tableau.upper[layout.artificial_slice] = 0.0
                tableau.x[layout.artificial_slice] = np.minimum(tableau.x[layout.artificial_slice], 0.0)
                tableau.at_upper[layout.artificial_slice] = False

            status = tableau.run(layout.cost, self.max_iterations)
            if status is not LpStatus.OPTIMAL:
                value = -np.inf if status is LpStatus.UNBOUNDED else np.inf
                return LpResult(status, None, value, tableau.iterations)
            tableau.refactor()
        except _Breakdown as exc:
            iterations = tableau.iterations if tableau is not None else 0
            return LpResult(LpStatus.NUMERICAL, None, np.inf, iterations, message=str(exc))
        return self._remember(self._finish(tableau, lower, upper, warm=False), tableau)

    def _finish(self, tableau: _Tableau, lower: np.ndarray, upper: np.ndarray, *, warm: bool) -> LpResult:
        model = self.model
        x = tableau.x[: model.n_cols].copy()
        # clamp round-off at the bounds
        x = np.minimum(np.maximum(x, lower), upper)
        violation = _max_violation(model, self._masks, x, lower, upper)
        if violation > 1e3 * FEASIBILITY_TOL:
            return LpResult(
                LpStatus.NUMERICAL,
                x,
                model.objective(x),
                tableau.iterations,
                message=f"final point violates rows by {violation:.3e}",
                warm_started=warm,
            )
        return LpResult(
            LpStatus.OPTIMAL, x, model.objective(x), tableau.iterations, tableau.snapshot(), warm_started=warm
        )


def solve_lp(
    model: MilpModel,
    lower: np.ndarray | None = None,
    upper: np.ndarray | None = None,
    max_iterations: int = 200_000,
) -> LpResult:
    """
    Solve the continuous relaxation of `model` from scratch, optionally with overriding column
    bounds. Lower bounds must be finite.
    """
    return LpSession(model, max_iterations).solve(lower, upper)
