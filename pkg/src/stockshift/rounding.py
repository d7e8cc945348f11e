import dataclasses
import math
import time

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field, model_validator

from stockshift.domain import Instance, ObjectiveTerms, Solution, SolverConfig
from stockshift.mcf import build_rounding_network
from stockshift.model import evaluate_objective

COST_FLOOR = 1e-9


class RoundingRunConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    max_runs: int = Field(default=50, ge=1)
    stall_limit: int = Field(default=5, ge=1)
    cost_match_tolerance: float = Field(default=1e-6, ge=0.0)
    perturbation_low: float = Field(default=0.8, gt=0.0)
    perturbation_high: float = Field(default=1.2, gt=0.0)
    rng_seed: int = Field(default=0, ge=0)

    @model_validator(mode="after")
    def _ordered_perturbation(self):
        if self.perturbation_low > self.perturbation_high:
            msg = "perturbation_low must not exceed perturbation_high"
            raise ValueError(msg)
        return self


@dataclasses.dataclass(frozen=True)
class RoundingOutcome:
    X: np.ndarray
    Y: np.ndarray
    runs_used: int
    packages_added: list[int]
    best_run: int
    best_objective: ObjectiveTerms
    run_costs: list[float]
    best_costs: list[float]
    wall_time: float

    def solution(self, instance: Instance) -> Solution:
        return Solution.from_transfers(instance, self.X, self.Y, self.best_objective)


def rounding_costs(instance: Instance, X_partial: np.ndarray, Y: np.ndarray) -> np.ndarray:  # noqa: N803
    """
    Arc cost for the rounding flow: minus the remaining package capacity on the arc, measured
    in units of the arc's mean package cost. Arcs carrying no package get zero.
    """
    if not instance.n_movements:
        return np.zeros(0)
    Y = np.asarray(Y, dtype=float)
    remaining = Y @ instance.capacity - np.asarray(X_partial, dtype=float) @ instance.weight
    remaining[Y.sum(axis=1) == 0] = 0.0
    mean_cost = np.maximum(instance.cost.mean(axis=1), COST_FLOOR) if instance.n_packages else np.ones(len(Y))
    return -remaining / mean_cost


def _cheapest_packages(instance: Instance) -> np.ndarray:
    """Index of the cheapest package type per movement; argmin keeps the lower index on ties."""
    return np.argmin(instance.cost, axis=1)


def _top_up_packages(instance: Instance, X: np.ndarray, Y: np.ndarray, cheapest: np.ndarray) -> int:  # noqa: N803
    load = X @ instance.weight
    room = Y @ instance.capacity
    added = 0
    for m in np.flatnonzero(load > room + 1e-9):
        p = cheapest[m]
        count = math.ceil((load[m] - room[m]) / instance.capacity[p] - 1e-9)
        Y[m, p] += count
        added += count
    return added


def _single_run(
    instance: Instance,
    relaxed: Solution,
    order: np.ndarray,
    perturbation: np.ndarray,
    cheapest: np.ndarray,
) -> tuple[np.ndarray, np.ndarray, int]:
    X = np.asarray(relaxed.X, dtype=float).copy()
    Y = np.asarray(relaxed.Y, dtype=np.int64).copy()
    added = 0
    for s in order:
        c_hat = rounding_costs(instance, X, Y) * perturbation
        network = build_rounding_network(instance, int(s), X[:, s], c_hat)
        X[:, s] = network.solve()
        added += _top_up_packages(instance, X, Y, cheapest)
    return np.rint(X).astype(np.int64), Y, added


def round_all(
    instance: Instance,
    relaxed: Solution,
    solver_config: SolverConfig | None = None,
    config: RoundingRunConfig | None = None,
) -> RoundingOutcome:
    """
    Round a relaxed solution to an integral one, SKU by SKU, over repeated runs.

    The first run takes SKUs by decreasing weight with unperturbed costs; later runs shuffle
    the SKU order and scale every arc cost by an independent uniform factor. The loop stops
    early once a run adds no package and matches the relaxed cost, or after the best cost
    has not improved for ``stall_limit`` runs.
    """
    solver_config = solver_config or SolverConfig()
    config = config or RoundingRunConfig()
    start = time.perf_counter()
    rng = np.random.Generator(np.random.PCG64(config.rng_seed))

    relaxed_cost = evaluate_objective(instance, relaxed, solver_config).total
    cheapest = _cheapest_packages(instance) if instance.n_movements and instance.n_packages else None
    first_order = np.array(sorted(range(instance.n_skus), key=lambda s: (-instance.weight[s], s)), dtype=np.int64)

    best: tuple[np.ndarray, np.ndarray, ObjectiveTerms] | None = None
    best_run = 0
    packages_added: list[int] = []
    run_costs: list[float] = []
    best_costs: list[float] = []
    stalled = 0

    for run in range(1, config.max_runs + 1):
        if run == 1:
            order = first_order
            perturbation = np.ones(instance.n_movements)
        else:
            order = rng.permutation(instance.n_skus)
            perturbation = rng.uniform(config.perturbation_low, config.perturbation_high, instance.n_movements)
        if cheapest is None:
            X = np.rint(relaxed.X).astype(np.int64)
            Y, added = np.asarray(relaxed.Y, dtype=np.int64).copy(), 0
        else:
            X, Y, added = _single_run(instance, relaxed, order, perturbation, cheapest)

        terms = evaluate_objective(instance, Solution.from_transfers(instance, X, Y), solver_config)
        packages_added.append(added)
        run_costs.append(terms.total)
        if best is None or terms.total < best[2].total - 1e-12:
            best = (X, Y, terms)
            best_run = run
            stalled = 0
        else:
            stalled += 1
        best_costs.append(best[2].total)
        logger.trace(f"rounding run {run}: cost {terms.total:.6f}, {added} packages added")

        if added == 0 and abs(terms.total - relaxed_cost) <= config.cost_match_tolerance * max(1.0, abs(relaxed_cost)):
            break
        if stalled >= config.stall_limit:
            break

    X, Y, terms = best
    wall_time = time.perf_counter() - start
    logger.debug(f"rounding finished after {len(run_costs)} runs, best run {best_run} cost {terms.total:.6f}")
    return RoundingOutcome(
        X=X,
        Y=Y,
        runs_used=len(run_costs),
        packages_added=packages_added,
        best_run=best_run,
        best_objective=terms,
        run_costs=run_costs,
        best_costs=best_costs,
        wall_time=wall_time,
    )
