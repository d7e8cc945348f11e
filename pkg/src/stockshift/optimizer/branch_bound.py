import dataclasses
import heapq
import math
import time
from enum import StrEnum

import numpy as np
from loguru import logger

from stockshift.model import MilpModel
from stockshift.optimizer.simplex import LpBasis, LpSession, LpStatus
from stockshift.util import INTEGRALITY_TOL, relative_gap


class SolverFault(RuntimeError):
    pass


class MilpStatus(StrEnum):
    OPTIMAL = "optimal"
    FEASIBLE = "feasible"
    """Stopped at a limit with an incumbent whose gap is still open"""
    INFEASIBLE = "infeasible"
    TIME_LIMIT_NO_INCUMBENT = "time_limit_no_incumbent"


@dataclasses.dataclass(frozen=True)
class SolveLimits:
    time_limit: float | None = 300.0
    gap: float = 1e-6
    node_limit: int = 10**6
    max_open_nodes: int = 10**6


@dataclasses.dataclass(frozen=True)
class MilpResult:
    status: MilpStatus
    x: np.ndarray | None
    objective: float
    bound: float
    gap: float
    nodes: int
    wall_time: float
    time_to_first_incumbent: float | None = None
    lp_iterations: int = 0

    @property
    def has_incumbent(self) -> bool:
        return self.x is not None


@dataclasses.dataclass(order=True)
class _Node:
    bound: float
    seq: int
    depth: int = dataclasses.field(compare=False)
    changes: tuple[tuple[int, float, float], ...] = dataclasses.field(compare=False)
    start: LpBasis | None = dataclasses.field(default=None, compare=False)
    """Optimal basis of the parent LP"""


def _branching_column(x: np.ndarray, integer: np.ndarray) -> int | None:
    """Most fractional integer column, lowest index on ties."""
    distance = np.abs(x - np.rint(x))
    distance[~integer] = 0.0
    col = int(np.argmax(distance))
    if distance[col] <= INTEGRALITY_TOL:
        return None
    return col


def solve_milp(model: MilpModel, limits: SolveLimits | None = None) -> MilpResult:
    """
    Branch-and-bound over the integer columns of `model`.

    Dives depth-first until the first incumbent, then switches to best-bound selection.
    Each child LP starts from its parent's optimal basis. A node whose LP fails numerically
    or runs out of iterations stays open: its parent bound enters the reported bound.
    The reported bound never decreases and never exceeds the incumbent objective.

    :raises SolverFault: a node LP failed and no incumbent was found
    """
    limits = limits or SolveLimits()
    start = time.perf_counter()
    deadline = None if limits.time_limit is None else start + limits.time_limit
    root_lower = np.asarray(model.lower, dtype=float)
    root_upper = np.asarray(model.upper, dtype=float)
    integer = np.asarray(model.integer, dtype=bool)
    session = LpSession(model)

    incumbent_x: np.ndarray | None = None
    incumbent = math.inf
    first_incumbent_at: float | None = None
    global_bound = -math.inf
    pruned_bound = math.inf
    nodes = 0
    lp_iterations = 0
    seq = 0

    dive: list[_Node] = [_Node(-math.inf, 0, 0, ())]
    heap: list[_Node] = []
    unexplored: list[float] = []
    hit_limit = False

    def cutoff() -> float:
        return incumbent - max(limits.gap * max(1.0, abs(incumbent)), 1e-9)

    while dive or heap:
        if deadline is not None and time.perf_counter() >= deadline:
            hit_limit = True
            break
        if nodes >= limits.node_limit or len(dive) + len(heap) > limits.max_open_nodes:
            hit_limit = True
            break

        node = dive.pop() if dive else heapq.heappop(heap)
        if incumbent_x is not None and node.bound >= cutoff():
            pruned_bound = min(pruned_bound, node.bound)
            continue

        lower, upper = root_lower.copy(), root_upper.copy()
        for col, lo, up in node.changes:
            lower[col], upper[col] = lo, up
        lp = session.solve(lower, upper, node.start)
        nodes += 1
        lp_iterations += lp.iterations
        if lp.status is LpStatus.INFEASIBLE:
            continue
        if lp.status is not LpStatus.OPTIMAL:
            logger.warning(
                f"{model.name}: node LP at depth {node.depth} ended with status {lp.status}"
                f"{': ' + lp.message if lp.message else ''}; keeping its bound {node.bound:.6f} open"
            )
            unexplored.append(node.bound)
            continue
        if nodes == 1:
            global_bound = lp.objective
            logger.debug(f"{model.name}: root bound {lp.objective:.6f} after {lp.iterations} simplex iterations")
        if incumbent_x is not None and lp.objective >= cutoff():
            pruned_bound = min(pruned_bound, lp.objective)
            continue

        col = _branching_column(lp.x, integer)
        if col is None:
            x = lp.x.copy()
            x[integer] = np.rint(x[integer])
            value = model.objective(x)
            if value < incumbent:
                incumbent, incumbent_x = value, x
                if first_incumbent_at is None:
                    first_incumbent_at = time.perf_counter() - start
                    # switch from diving to best-bound search
                    for open_node in dive:
                        heapq.heappush(heap, open_node)
                    dive.clear()
                logger.debug(f"{model.name}: incumbent {incumbent:.6f} at node {nodes}")
            continue

        value = lp.x[col]
        down = (*node.changes, (col, lower[col], math.floor(value)))
        up = (*node.changes, (col, math.ceil(value), upper[col]))
        children = [down, up] if value - math.floor(value) >= 0.5 else [up, down]
        for changes in children:
            seq += 1
            child = _Node(lp.objective, seq, node.depth + 1, changes, lp.basis)
            if incumbent_x is None:
                dive.append(child)
            else:
                heapq.heappush(heap, child)

    open_bounds = [n.bound for n in dive] + [n.bound for n in heap] + unexplored
    wall_time = time.perf_counter() - start
    if incumbent_x is None and unexplored:
        msg = f"{model.name}: {len(unexplored)} node LPs failed and no incumbent was found"
        raise SolverFault(msg)
    if incumbent_x is None:
        status = MilpStatus.TIME_LIMIT_NO_INCUMBENT if hit_limit else MilpStatus.INFEASIBLE
        bound = max(global_bound, min(open_bounds, default=global_bound)) if hit_limit else math.inf
        logger.debug(f"{model.name}: {status} after {nodes} nodes")
        return MilpResult(status, None, math.inf, bound, math.inf, nodes, wall_time, None, lp_iterations)

    bound = min([incumbent, pruned_bound, *open_bounds])
    bound = min(max(bound, global_bound), incumbent)
    gap = relative_gap(incumbent, bound)
    closed = not hit_limit and not unexplored
    status = MilpStatus.OPTIMAL if closed or gap <= limits.gap else MilpStatus.FEASIBLE
    logger.debug(f"{model.name}: {status} objective {incumbent:.6f} bound {bound:.6f} nodes {nodes}")
    return MilpResult(status, incumbent_x, incumbent, bound, gap, nodes, wall_time, first_incumbent_at, lp_iterations)
