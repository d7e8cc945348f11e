"""
The two solution schemes: T-P (solve T, then pack) and RT-R-P (solve RT_delta, round, then pack)
"""

import json
import time
from typing import Any

import numpy as np
from loguru import logger
from pydantic import BaseModel, ConfigDict, Field

from stockshift.domain import Instance, InstanceError, Solution, SolverConfig, validate_instance
from stockshift.model import build_transfer_model, evaluate_objective, solution_from_vector
from stockshift.optimizer.branch_bound import MilpResult, MilpStatus, SolveLimits, solve_milp
from stockshift.packing import DEFAULT_EXACT_THRESHOLD, PackedSolution, pack_all
from stockshift.rounding import RoundingOutcome, RoundingRunConfig, round_all

INFEASIBLE = "infeasible"


class PipelineReport(BaseModel):
    model_config = ConfigDict(arbitrary_types_allowed=True)

    scheme: str
    delta: float | None = None
    status: str
    milp_objective: float | None = None
    milp_bound: float | None = None
    milp_gap: float | None = None
    milp_nodes: int = 0
    time_to_first_incumbent: float | None = None
    times: dict[str, float] = Field(default_factory=dict)
    lower_bound: float | None = None
    upper_bound: float | None = None
    packages: dict[str, int] = Field(default_factory=dict)
    transport: dict[str, float] = Field(default_factory=dict)
    terms: dict[str, dict[str, float]] = Field(default_factory=dict)
    rounding: dict[str, Any] | None = None
    packed_all_exact: bool | None = None

    solution: Solution | None = Field(default=None, exclude=True)
    packed: PackedSolution | None = Field(default=None, exclude=True)

    @property
    def solved(self) -> bool:
        return self.packed is not None

    @property
    def solve_phase(self) -> str:
        return "T" if self.scheme == "TP" else "RT"

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=1, sort_keys=True)

    def csv_row(self) -> dict[str, Any]:
        row: dict[str, Any] = {
            "scheme": self.scheme,
            "delta": self.delta,
            "status": self.status,
            "objective": self.milp_objective,
            "bound": self.milp_bound,
            "gap": self.milp_gap,
            "nodes": self.milp_nodes,
            "time_to_first_incumbent": self.time_to_first_incumbent,
            "lower_bound": self.lower_bound,
            "upper_bound": self.upper_bound,
        }
        for phase in ("solve", "rounding", "packing", "total"):
            row[f"time_{phase}"] = self.times.get(phase)
        for phase in ("solve", "R", "P"):
            key = self.solve_phase if phase == "solve" else phase
            row[f"packages_{phase}"] = self.packages.get(key)
            row[f"transport_{phase}"] = self.transport.get(key)
        return row


def _check_instance(instance: Instance) -> bool:
    """True when the instance is structurally valid and passes the aggregate stock check."""
    report = validate_instance(instance)
    structural = [v for v in report.violations if v.kind != "aggregate infeasibility"]
    if structural:
        msg = "; ".join(v.detail for v in structural[:5])
        raise InstanceError(msg)
    return report.ok


def _milp_fields(result: MilpResult) -> dict[str, Any]:
    return {
        "status": str(result.status),
        "milp_objective": result.objective if result.has_incumbent else None,
        "milp_bound": result.bound if np.isfinite(result.bound) else None,
        "milp_gap": result.gap if result.has_incumbent else None,
        "milp_nodes": result.nodes,
        "time_to_first_incumbent": result.time_to_first_incumbent,
    }


def _phase(report: PipelineReport, phase: str, instance: Instance, solution: Solution, config: SolverConfig):
    terms = evaluate_objective(instance, solution, config)
    report.packages[phase] = solution.package_count
    report.transport[phase] = terms.transport
    report.terms[phase] = terms.as_dict()


def _pack(report: PipelineReport, instance: Instance, solution: Solution, config: SolverConfig, exact_threshold: int):
    started = time.perf_counter()
    packed = pack_all(instance, solution, exact_threshold)
    report.times["packing"] = time.perf_counter() - started
    report.packed = packed
    report.packed_all_exact = packed.all_exact
    _phase(report, "P", instance, packed.solution, config)
    report.upper_bound = report.terms["P"]["total"]


def run_tp(
    instance: Instance,
    config: SolverConfig | None = None,
    limits: SolveLimits | None = None,
    exact_threshold: int = DEFAULT_EXACT_THRESHOLD,
) -> PipelineReport:
    config = config or SolverConfig()
    limits = limits or SolveLimits(time_limit=config.time_limit)
    started = time.perf_counter()
    if not _check_instance(instance):
        return PipelineReport(scheme="TP", status=INFEASIBLE, times={"total": 0.0})

    model = build_transfer_model(instance, config, relaxed=False)
    result = solve_milp(model, limits)
    report = PipelineReport(scheme="TP", times={"solve": result.wall_time}, **_milp_fields(result))
    if result.has_incumbent:
        solution = solution_from_vector(instance, model, result.x, config)
        report.solution = solution
        _phase(report, "T", instance, solution, config)
        _pack(report, instance, solution, config, exact_threshold)
        report.lower_bound = min(result.bound, report.upper_bound)
    report.times["total"] = time.perf_counter() - started
    logger.info(f"TP finished with status {report.status} in {report.times['total']:.2f}s")
    return report


def run_rtrp(
    instance: Instance,
    config: SolverConfig | None = None,
    limits: SolveLimits | None = None,
    rounding_config: RoundingRunConfig | None = None,
    exact_threshold: int = DEFAULT_EXACT_THRESHOLD,
) -> PipelineReport:
    """
    Solve RT_delta with the whole time limit, round the transfers, then pack. The RT_delta
    bound is only a valid lower bound on T when delta is 1.
    """
    config = config or SolverConfig()
    limits = limits or SolveLimits(time_limit=config.time_limit)
    scheme = f"RTRP({config.delta:g})"
    started = time.perf_counter()
    if not _check_instance(instance):
        return PipelineReport(scheme=scheme, delta=config.delta, status=INFEASIBLE, times={"total": 0.0})

    model = build_transfer_model(instance, config, relaxed=True)
    result = solve_milp(model, limits)
    report = PipelineReport(scheme=scheme, delta=config.delta, times={"solve": result.wall_time}, **_milp_fields(result))
    if result.has_incumbent:
        relaxed = solution_from_vector(instance, model, result.x, config)
        _phase(report, "RT", instance, relaxed, config)

        outcome: RoundingOutcome = round_all(instance, relaxed, config, rounding_config)
        report.times["rounding"] = outcome.wall_time
        rounded = outcome.solution(instance)
        report.solution = rounded
        report.rounding = {
            "runs_used": outcome.runs_used,
            "best_run": outcome.best_run,
            "packages_added": outcome.packages_added[outcome.best_run - 1],
            "wall_time": outcome.wall_time,
        }
        _phase(report, "R", instance, rounded, config)
        _pack(report, instance, rounded, config, exact_threshold)
        if config.delta == 1.0 and result.status in (MilpStatus.OPTIMAL, MilpStatus.FEASIBLE):
            report.lower_bound = min(result.bound, report.upper_bound)
    report.times["total"] = time.perf_counter() - started
    logger.info(f"{scheme} finished with status {report.status} in {report.times['total']:.2f}s")
    return report
