"""
Policy comparison: solve T under CR, DR and GR on shared base instances while the cost of
every warehouse movement is rescaled, and measure how much worse each policy is than the best.
"""

import dataclasses
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor

import numpy as np
import pandas as pd
from loguru import logger
from tqdm import tqdm

from stockshift.domain import MovementPolicy, SolverConfig
from stockshift.instgen import GeneratorParams, generate_instance
from stockshift.model import build_transfer_model, evaluate_objective, solution_from_vector
from stockshift.optimizer.branch_bound import MilpStatus, SolveLimits, solve_milp

POLICIES = (MovementPolicy.CR, MovementPolicy.DR, MovementPolicy.GR)
DEFAULT_ALPHAS = (0.0, 0.1, 10.0, 100.0)
DEFAULT_FACTORS = (0.01, 0.1, 0.25, 0.5, 0.75, 0.9, 1.0, 1.1, 1.5, 2.0, 5.0, 10.0, 100.0)


@dataclasses.dataclass(frozen=True)
class _SweepTask:
    instance: int
    params: GeneratorParams
    alpha: float
    factors: tuple[float, ...]
    base_config: SolverConfig
    limits: SolveLimits


def _solve_task(task: _SweepTask) -> list[dict]:
    base = generate_instance(task.params)
    config = task.base_config.model_copy(update={"alpha": task.alpha})
    records = []
    for factor in task.factors:
        scaled = base.with_scaled_warehouse_costs(factor)
        for policy in POLICIES:
            instance = scaled.with_policy(policy)
            model = build_transfer_model(instance, config)
            result = solve_milp(model, task.limits)
            record = {
                "instance": task.instance,
                "alpha": task.alpha,
                "factor": factor,
                "policy": str(policy),
                "status": str(result.status),
                "proven": result.status is MilpStatus.OPTIMAL,
                "objective": np.nan,
                "transport": np.nan,
                "wall_time": result.wall_time,
            }
            if result.has_incumbent:
                terms = evaluate_objective(instance, solution_from_vector(instance, model, result.x, config), config)
                record["objective"] = terms.total
                record["transport"] = terms.transport
            records.append(record)
    return records


def relative_worsening(values: pd.Series) -> pd.Series:
    """(value - best) / best, with the denominator clamped at 1 so zero-cost optima stay finite."""
    best = values.min()
    return (values - best) / max(best, 1.0)


@dataclasses.dataclass
class PolicySweepResult:
    records: pd.DataFrame

    @property
    def included(self) -> pd.DataFrame:
        return self.records[self.records["included"]]

    @property
    def excluded_count(self) -> int:
        """Number of (instance, alpha, factor) comparisons dropped because a policy had no incumbent."""
        groups = self.records.groupby(["instance", "alpha", "factor"])["included"].all()
        return int((~groups).sum())

    def averages(self, metric: str = "worsening") -> pd.DataFrame:
        """Mean worsening per (alpha, factor) row and policy column."""
        table = self.included.pivot_table(index=["alpha", "factor"], columns="policy", values=metric, aggfunc="mean")
        return table.reindex(columns=[str(p) for p in POLICIES])


def _attach_worsening(records: pd.DataFrame) -> pd.DataFrame:
    keys = ["instance", "alpha", "factor"]
    records = records.sort_values([*keys, "policy"], kind="stable").reset_index(drop=True)
    records["included"] = records.groupby(keys)["objective"].transform(lambda v: v.notna().all()).astype(bool)
    records["worsening"] = np.nan
    records["transport_worsening"] = np.nan
    mask = records["included"]
    if mask.any():
        grouped = records[mask].groupby(keys)
        records.loc[mask, "worsening"] = grouped["objective"].transform(relative_worsening)
        records.loc[mask, "transport_worsening"] = grouped["transport"].transform(relative_worsening)
    return records


def compare_policies(
    n_instances: int,
    alphas: Sequence[float] = DEFAULT_ALPHAS,
    factors: Sequence[float] = DEFAULT_FACTORS,
    limits: SolveLimits | None = None,
    seed: int = 0,
    preset: str = "small",
    base_config: SolverConfig | None = None,
    jobs: int = 1,
    *,
    progress: bool = False,
) -> PolicySweepResult:
    if n_instances < 1:
        msg = f"need at least one base instance, got {n_instances}"
        raise ValueError(msg)
    limits = limits or SolveLimits()
    base_config = base_config or SolverConfig()
    tasks = [
        _SweepTask(
            instance=k,
            params=GeneratorParams.from_preset(preset, rng_seed=seed + k, movement_policy=MovementPolicy.GR),
            alpha=float(alpha),
            factors=tuple(float(f) for f in factors),
            base_config=base_config,
            limits=limits,
        )
        for k in range(n_instances)
        for alpha in alphas
    ]
    logger.info(f"Policy sweep: {n_instances} instances x {len(alphas)} alphas x {len(factors)} factors x 3 policies")

    records: list[dict] = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            for batch in tqdm(pool.map(_solve_task, tasks), total=len(tasks), disable=not progress, desc="policies"):
                records.extend(batch)
    else:
        for task in tqdm(tasks, disable=not progress, desc="policies"):
            records.extend(_solve_task(task))

    result = PolicySweepResult(_attach_worsening(pd.DataFrame.from_records(records)))
    if result.excluded_count:
        logger.warning(f"{result.excluded_count} comparisons excluded, some policy found no incumbent")
    return result
