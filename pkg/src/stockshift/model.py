import dataclasses
import math
from enum import StrEnum

import numpy as np
import scipy.sparse as sp
from loguru import logger

from stockshift.domain import Instance, ObjectiveTerms, SendRule, Solution, SolverConfig
from stockshift.util import INTEGRALITY_TOL, snap_integral

FEASIBILITY_TOL = 1e-6


class ModelBuildError(ValueError):
    pass


class RowSense(StrEnum):
    LE = "L"
    """Row activity at most the right-hand side"""
    EQ = "E"
    """Row activity equal to the right-hand side"""
    GE = "G"
    """Row activity at least the right-hand side"""


@dataclasses.dataclass(frozen=True)
class MilpModel:
    """
    Minimization model ``min c.x  s.t.  A x (senses) rhs,  lower <= x <= upper``.

    ``blocks`` maps a variable family (``X``, ``Y``, ``FS``, ``U``) to its column offset and shape,
    so solver vectors can be reshaped back into instance-indexed arrays.
    """

    name: str
    c: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    integer: np.ndarray
    A: sp.csr_matrix
    senses: tuple[RowSense, ...]
    rhs: np.ndarray
    column_names: tuple[str, ...]
    row_names: tuple[str, ...]
    blocks: dict[str, tuple[int, tuple[int, ...]]] = dataclasses.field(default_factory=dict)
    offset: float = 0.0

    @property
    def n_cols(self) -> int:
        return len(self.c)

    @property
    def n_rows(self) -> int:
        return len(self.rhs)

    @property
    def n_integer(self) -> int:
        return int(self.integer.sum())

    def block(self, x: np.ndarray, name: str) -> np.ndarray:
        start, shape = self.blocks[name]
        size = int(np.prod(shape))
        return np.asarray(x[start : start + size]).reshape(shape)

    def objective(self, x: np.ndarray) -> float:
        return float(self.c @ x) + self.offset

    def relaxed(self) -> "MilpModel":
        return dataclasses.replace(self, integer=np.zeros_like(self.integer))


@dataclasses.dataclass(frozen=True)
class FeasibilityViolation:
    constraint: str
    index: tuple
    slack: float


@dataclasses.dataclass
class FeasibilityReport:
    violations: list[FeasibilityViolation] = dataclasses.field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def constraints(self) -> set[str]:
        return {v.constraint for v in self.violations}


class _RowBuilder:
    def __init__(self):
        self.rows: list[int] = []
        self.cols: list[int] = []
        self.vals: list[float] = []
        self.senses: list[RowSense] = []
        self.rhs: list[float] = []
        self.names: list[str] = []

    def add(self, name: str, entries: list[tuple[int, float]], sense: RowSense, rhs: float) -> None:
        r = len(self.rhs)
        for col, val in entries:
            if val != 0.0:
                self.rows.append(r)
                self.cols.append(col)
                self.vals.append(val)
        self.senses.append(sense)
        self.rhs.append(float(rhs))
        self.names.append(name)

    def matrix(self, n_cols: int) -> sp.csr_matrix:
        return sp.csr_matrix((self.vals, (self.rows, self.cols)), shape=(len(self.rhs), n_cols))


def send_limits(instance: Instance, send_rule: SendRule) -> np.ndarray:
    """Right-hand side of the outlet send-limit rows, shape (|F|, |S|); warehouse rows are unused."""
    if SendRule(send_rule) is SendRule.UP_TO_STOCK:
        return instance.initial_stock.astype(float)
    return np.maximum(0, instance.initial_stock - instance.fixed_demand).astype(float)


def package_upper_bounds(instance: Instance, delta: float = 1.0) -> np.ndarray:
    """Per-type package bound: enough packages of that type to carry the whole network's stock."""
    total_weight = float(instance.weight @ instance.sku_totals())
    return np.array([math.ceil(total_weight / (delta * cap) - 1e-9) for cap in instance.capacity], dtype=float)


def build_transfer_model(instance: Instance, config: SolverConfig, *, relaxed: bool = False) -> MilpModel:
    """Build T, or RT_delta when `relaxed` (continuous transfers and package capacities scaled by delta)."""
    delta = config.delta if relaxed else 1.0
    if not 0.0 < delta <= 1.0:
        msg = f"delta must lie in (0, 1], got {delta}"
        raise ModelBuildError(msg)
    if instance.initial_stock.shape != (instance.n_facilities, instance.n_skus):
        msg = "instance arrays do not match its index sets, run validate_instance first"
        raise ModelBuildError(msg)

    n_m, n_s, n_p, n_f = instance.n_movements, instance.n_skus, instance.n_packages, instance.n_facilities
    outlets = instance.outlets
    n_o = len(outlets)

    x0 = 0
    y0 = x0 + n_m * n_s
    fs0 = y0 + n_m * n_p
    u0 = fs0 + n_f * n_s
    n_cols = u0 + n_o * n_s

    def xcol(m, s):
        return x0 + m * n_s + s

    def ycol(m, p):
        return y0 + m * n_p + p

    def fscol(i, s):
        return fs0 + i * n_s + s

    def ucol(k, s):
        return u0 + k * n_s + s

    totals = instance.sku_totals().astype(float)
    demand = (instance.fixed_demand + instance.variable_demand).astype(float)

    c = np.zeros(n_cols)
    lower = np.zeros(n_cols)
    upper = np.zeros(n_cols)
    integer = np.zeros(n_cols, dtype=bool)
    names: list[str] = [""] * n_cols

    for m, (i, j) in enumerate(instance.movements):
        for s in range(n_s):
            col = xcol(m, s)
            c[col] = config.epsilon
            upper[col] = totals[s]
            integer[col] = not relaxed
            names[col] = f"X_{i}_{j}_{s}"
    y_bounds = package_upper_bounds(instance, delta)
    for m, (i, j) in enumerate(instance.movements):
        for p in range(n_p):
            col = ycol(m, p)
            c[col] = instance.cost[m, p]
            upper[col] = y_bounds[p]
            integer[col] = True
            names[col] = f"Y_{i}_{j}_{p}"
    for i in range(n_f):
        for s in range(n_s):
            col = fscol(i, s)
            upper[col] = totals[s]
            names[col] = f"FS_{i}_{s}"
    for k, i in enumerate(outlets):
        for s in range(n_s):
            col = ucol(k, s)
            c[col] = config.alpha * instance.priority[i, s]
            upper[col] = demand[i, s]
            names[col] = f"U_{i}_{s}"

    outgoing: dict[int, list[int]] = {i: [] for i in range(n_f)}
    incoming: dict[int, list[int]] = {i: [] for i in range(n_f)}
    for m, (i, j) in enumerate(instance.movements):
        outgoing[i].append(m)
        incoming[j].append(m)

    rows = _RowBuilder()
    for i in range(n_f):
        for s in range(n_s):
            entries = [(fscol(i, s), 1.0)]
            entries += [(xcol(m, s), -1.0) for m in incoming[i]]
            entries += [(xcol(m, s), 1.0) for m in outgoing[i]]
            rows.add(f"FSDEF_{i}_{s}", entries, RowSense.EQ, instance.initial_stock[i, s])
    for i in outlets:
        for s in range(n_s):
            rows.add(f"FDEM_{i}_{s}", [(fscol(i, s), 1.0)], RowSense.GE, instance.fixed_demand[i, s])
    limits = send_limits(instance, config.send_rule)
    for i in outlets:
        for s in range(n_s):
            rows.add(f"SEND_{i}_{s}", [(xcol(m, s), 1.0) for m in outgoing[i]], RowSense.LE, limits[i, s])
    for m, (i, j) in enumerate(instance.movements):
        entries = [(xcol(m, s), float(instance.weight[s])) for s in range(n_s)]
        entries += [(ycol(m, p), -delta * float(instance.capacity[p])) for p in range(n_p)]
        rows.add(f"CAP_{i}_{j}", entries, RowSense.LE, 0.0)
    for k, i in enumerate(outlets):
        for s in range(n_s):
            rows.add(f"SHORT_{i}_{s}", [(ucol(k, s), 1.0), (fscol(i, s), 1.0)], RowSense.GE, demand[i, s])

    model = MilpModel(
        name=f"RT_{delta:g}" if relaxed else "T",
        c=c,
        lower=lower,
        upper=upper,
        integer=integer,
        A=rows.matrix(n_cols),
        senses=tuple(rows.senses),
        rhs=np.array(rows.rhs),
        column_names=tuple(names),
        row_names=tuple(rows.names),
        blocks={"X": (x0, (n_m, n_s)), "Y": (y0, (n_m, n_p)), "FS": (fs0, (n_f, n_s)), "U": (u0, (n_o, n_s))},
    )
    logger.debug(f"Built {model.name}: {model.n_cols} columns ({model.n_integer} integer), {model.n_rows} rows")
    return model


def solution_from_vector(instance: Instance, model: MilpModel, x: np.ndarray, config: SolverConfig) -> Solution:
    X = model.block(x, "X")
    if X.size and model.integer[model.blocks["X"][0]]:
        X = np.rint(X)
    else:
        X = snap_integral(X)
    X = np.maximum(X, 0.0)
    solution = Solution.from_transfers(instance, X, model.block(x, "Y"))
    return dataclasses.replace(solution, objective=evaluate_objective(instance, solution, config))


def evaluate_objective(instance: Instance, solution: Solution, config: SolverConfig) -> ObjectiveTerms:
    outlets = list(instance.outlets)
    transport = float(np.sum(instance.cost * solution.Y)) if instance.n_movements else 0.0
    shortfall = 0.0
    if outlets:
        gap = instance.fixed_demand[outlets] + instance.variable_demand[outlets] - solution.FS[outlets]
        shortfall = config.alpha * float(np.sum(instance.priority[outlets] * np.maximum(0.0, gap)))
    tiebreak = config.epsilon * float(np.sum(solution.X))
    return ObjectiveTerms(transport=transport, shortfall=shortfall, tiebreak=tiebreak)


def check_feasibility(
    instance: Instance, solution: Solution, config: SolverConfig, delta: float | None = None
) -> FeasibilityReport:
    """
    List every violated constraint of T, or of RT_delta when `delta` is supplied
    (capacities scaled by delta and transfers allowed to be fractional).
    """
    report = FeasibilityReport()
    tol = FEASIBILITY_TOL

    def flag(constraint, index, slack):
        report.violations.append(FeasibilityViolation(constraint, tuple(int(k) for k in index), float(slack)))

    X, Y = np.asarray(solution.X, dtype=float), np.asarray(solution.Y, dtype=float)
    if X.shape != (instance.n_movements, instance.n_skus) or Y.shape != (instance.n_movements, instance.n_packages):
        flag("shape", (), -1.0)
        return report

    for index in zip(*np.nonzero(X < -tol), strict=True):
        flag("nonnegativity X", index, X[index])
    for index in zip(*np.nonzero(Y < -tol), strict=True):
        flag("nonnegativity Y", index, Y[index])
    for index in zip(*np.nonzero(np.abs(Y - np.rint(Y)) > INTEGRALITY_TOL), strict=True):
        flag("integrality Y", index, -abs(Y[index] - np.rint(Y[index])))
    if delta is None:
        for index in zip(*np.nonzero(np.abs(X - np.rint(X)) > INTEGRALITY_TOL), strict=True):
            flag("integrality X", index, -abs(X[index] - np.rint(X[index])))

    FS = instance.final_stock(X)
    reported = np.asarray(solution.FS, dtype=float)
    if reported.shape == FS.shape:
        for index in zip(*np.nonzero(np.abs(reported - FS) > tol), strict=True):
            flag("final stock definition", index, -abs(reported[index] - FS[index]))
    for index in zip(*np.nonzero(FS < -tol), strict=True):
        flag("nonnegative final stock", index, FS[index])

    outlets = list(instance.outlets)
    limits = send_limits(instance, config.send_rule)
    sent = np.zeros((instance.n_facilities, instance.n_skus))
    if instance.n_movements:
        np.add.at(sent, instance.tails, X)
    for i in outlets:
        for s in range(instance.n_skus):
            slack = FS[i, s] - instance.fixed_demand[i, s]
            if slack < -tol:
                flag("fixed demand", (i, s), slack)
            slack = limits[i, s] - sent[i, s]
            if slack < -tol:
                flag("send limit", (i, s), slack)

    scale = 1.0 if delta is None else delta
    if instance.n_movements:
        load = X @ instance.weight
        room = Y @ (scale * instance.capacity)
        for m in np.flatnonzero(room - load < -tol):
            flag("package capacity", instance.movements[m], room[m] - load[m])
    return report
