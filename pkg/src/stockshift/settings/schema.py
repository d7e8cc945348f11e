from os import PathLike
from pathlib import Path

import tomli
from pydantic import BaseModel, Field

from stockshift.bench.policies import DEFAULT_FACTORS
from stockshift.domain import SendRule, SolverConfig
from stockshift.optimizer.branch_bound import SolveLimits
from stockshift.rounding import RoundingRunConfig


class SolverSettings(BaseModel):
    alpha: float = Field(default=1.0, ge=0.0)
    epsilon: float = Field(default=0.0001, ge=0.0)
    delta: float = Field(default=1.0, gt=0.0, le=1.0)
    send_rule: SendRule = SendRule.EXCESS_ONLY
    time_limit: float | None = Field(default=300.0, gt=0.0)
    gap: float = Field(default=1e-6, ge=0.0)
    node_limit: int = Field(default=10**6, ge=1)
    rng_seed: int = Field(default=0, ge=0)


class RoundingSettings(BaseModel):
    max_runs: int = Field(default=50, ge=1)
    stall_limit: int = Field(default=5, ge=1)
    cost_match_tolerance: float = Field(default=1e-6, ge=0.0)
    perturbation_low: float = Field(default=0.8, gt=0.0)
    perturbation_high: float = Field(default=1.2, gt=0.0)


class PackingSettings(BaseModel):
    exact_threshold: int = Field(default=30, ge=0)


class BenchSettings(BaseModel):
    deltas: list[float] = Field(default_factory=lambda: [0.85, 0.9, 0.95, 1.0])
    alphas: list[float] = Field(default_factory=lambda: [0.0, 0.1, 10.0, 100.0])
    benchmark_alphas: list[float] = Field(default_factory=lambda: [0.0, 0.1, 10.0, 1000.0])
    scaling_factors: list[float] = Field(default_factory=lambda: list(DEFAULT_FACTORS))
    jobs: int = Field(default=1, ge=1)

    def schemes(self) -> list[str]:
        return ["tp", *(f"rtrp:{delta:g}" for delta in self.deltas)]


class StockshiftSettings(BaseModel):
    solver: SolverSettings = Field(default_factory=SolverSettings)
    rounding: RoundingSettings = Field(default_factory=RoundingSettings)
    packing: PackingSettings = Field(default_factory=PackingSettings)
    bench: BenchSettings = Field(default_factory=BenchSettings)

    def solver_config(self, **overrides) -> SolverConfig:
        values = self.solver.model_dump(include={"alpha", "epsilon", "delta", "send_rule", "time_limit", "rng_seed"})
        values.update({k: v for k, v in overrides.items() if v is not None})
        return SolverConfig(**values)

    def solve_limits(self, time_limit: float | None = None) -> SolveLimits:
        return SolveLimits(
            time_limit=time_limit if time_limit is not None else self.solver.time_limit,
            gap=self.solver.gap,
            node_limit=self.solver.node_limit,
        )

    def rounding_config(self, rng_seed: int | None = None) -> RoundingRunConfig:
        return RoundingRunConfig(
            **self.rounding.model_dump(), rng_seed=self.solver.rng_seed if rng_seed is None else rng_seed
        )


class SettingsSchema(BaseModel):
    stockshift: StockshiftSettings = Field(default_factory=StockshiftSettings)


def load_settings(path: PathLike | str | None) -> SettingsSchema:
    """Read a TOML options file; a missing path gives the built-in defaults."""
    if path is None or not Path(path).exists():
        return SettingsSchema()
    with open(path, "rb") as file:
        return SettingsSchema.model_validate(tomli.load(file))
