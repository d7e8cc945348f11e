"""
Algorithm benchmark: T-P against RT-R-P over a delta grid on one generated test set
"""

import dataclasses
import re
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from os import PathLike

import pandas as pd
from loguru import logger
from tqdm import tqdm

from stockshift.bench.profiles import PerformanceProfile, performance_profile
from stockshift.domain import SolverConfig
from stockshift.instgen import GeneratorParams, generate_instance
from stockshift.optimizer.branch_bound import SolveLimits
from stockshift.packing import DEFAULT_EXACT_THRESHOLD
from stockshift.pipelines import run_rtrp, run_tp
from stockshift.rounding import RoundingRunConfig

DEFAULT_SCHEMES = ("tp", "rtrp:0.85", "rtrp:0.9", "rtrp:0.95", "rtrp:1")
DEFAULT_ALPHAS = (0.0, 0.1, 10.0, 1000.0)
PHASES = ("solve", "R", "P")

_SCHEME = re.compile(r"^(tp|rtrp)(?::([0-9]*\.?[0-9]+))?$")


@dataclasses.dataclass(frozen=True)
class SchemeSpec:
    kind: str
    delta: float | None = None

    @classmethod
    def parse(cls, text: str) -> "SchemeSpec":
        match = _SCHEME.match(text.strip().lower())
        if match is None:
            msg = f"unknown scheme {text!r}, expected 'tp' or 'rtrp:<delta>'"
            raise ValueError(msg)
        kind, delta = match.groups()
        if kind == "tp":
            if delta is not None:
                msg = "the tp scheme takes no delta"
                raise ValueError(msg)
            return cls("tp")
        delta = 1.0 if delta is None else float(delta)
        if not 0.0 < delta <= 1.0:
            msg = f"delta must lie in (0, 1], got {delta}"
            raise ValueError(msg)
        return cls("rtrp", delta)

    @property
    def label(self) -> str:
        return "TP" if self.kind == "tp" else f"RTRP({self.delta:g})"


@dataclasses.dataclass(frozen=True)
class _BenchTask:
    instance: int
    params: GeneratorParams
    alpha: float
    scheme: SchemeSpec
    config: SolverConfig
    limits: SolveLimits
    rounding: RoundingRunConfig
    exact_threshold: int


def _run_task(task: _BenchTask) -> dict:
    instance = generate_instance(task.params)
    config = task.config.model_copy(update={"alpha": task.alpha})
    if task.scheme.kind == "tp":
        report = run_tp(instance, config, task.limits, task.exact_threshold)
    else:
        config = config.model_copy(update={"delta": task.scheme.delta})
        report = run_rtrp(instance, config, task.limits, task.rounding, task.exact_threshold)
    row = {"instance": task.instance, "seed": task.params.rng_seed, "alpha": task.alpha, "label": task.scheme.label}
    row.update(report.csv_row())
    return row


@dataclasses.dataclass
class BenchmarkResult:
    runs: pd.DataFrame
    preset: str

    @property
    def labels(self) -> list[str]:
        return list(dict.fromkeys(self.runs["label"]))

    def to_csv(self, path: PathLike | str) -> None:
        self.runs.to_csv(path, index=False)

    def phase_table(self, metric: str = "packages", *, aggregate: bool = True) -> pd.DataFrame:
        """
        Per-phase `metric` (packages or transport) of each scheme divided by the smallest value
        of that phase across schemes on the same instance. Rows whose minimum is zero are dropped.
        """
        frames = []
        for phase in PHASES:
            column = f"{metric}_{phase}"
            numeric = self.runs.assign(**{column: pd.to_numeric(self.runs[column], errors="coerce")})
            wide = numeric.pivot_table(index="instance", columns="label", values=column, aggfunc="first")
            wide = wide.reindex(columns=self.labels)
            row_min = wide.min(axis=1, skipna=True)
            keep = row_min > 0
            if (~keep).any():
                logger.debug(f"{int((~keep).sum())} instances with zero minimum dropped from phase {phase}")
            normalized = wide[keep].div(row_min[keep], axis=0)
            normalized.insert(0, "phase", phase)
            frames.append(normalized.reset_index())
        table = pd.concat(frames, ignore_index=True)
        if not aggregate:
            return table
        return table.groupby("phase", sort=False)[self.labels].mean()

    def solved_table(self, time_limits: Sequence[float]) -> pd.DataFrame:
        """Percentage of instances with an incumbent found within each time limit, per scheme."""
        first = self.runs["time_to_first_incumbent"].astype(float)
        table = {}
        for limit in time_limits:
            solved = first.notna() & (first <= limit)
            table[f"{limit:g}s"] = solved.groupby(self.runs["label"], sort=False).mean() * 100.0
        return pd.DataFrame(table).reindex(self.labels)

    def profiles(self, metric: str = "upper_bound") -> list[PerformanceProfile]:
        numeric = self.runs.assign(**{metric: pd.to_numeric(self.runs[metric], errors="coerce")})
        wide = numeric.pivot_table(index="label", columns="instance", values=metric, aggfunc="first", dropna=False)
        wide = wide.reindex(columns=sorted(self.runs["instance"].unique()))
        wide = wide.reindex(index=self.labels)
        keep = ~(wide <= 0).any(axis=0)
        if (~keep).any():
            logger.debug(f"{int((~keep).sum())} instances with a nonpositive {metric} left out of the profile")
        return performance_profile(wide.loc[:, keep].to_numpy(dtype=float), names=self.labels)


def run_benchmark(
    preset: str,
    schemes: Sequence[str | SchemeSpec] = DEFAULT_SCHEMES,
    limits: SolveLimits | None = None,
    n_instances: int = 1,
    seed: int = 0,
    alphas: Sequence[float] | None = None,
    config: SolverConfig | None = None,
    rounding: RoundingRunConfig | None = None,
    exact_threshold: int = DEFAULT_EXACT_THRESHOLD,
    jobs: int = 1,
    *,
    progress: bool = False,
) -> BenchmarkResult:
    """
    Solve every base instance of `preset` once per alpha and scheme. Each (base instance, alpha)
    pair is one test instance; without `alphas` the configured alpha is used alone.
    """
    specs = [s if isinstance(s, SchemeSpec) else SchemeSpec.parse(s) for s in schemes]
    config = config or SolverConfig()
    alphas = [float(a) for a in alphas] if alphas else [config.alpha]
    limits = limits or SolveLimits(time_limit=config.time_limit)
    rounding = rounding or RoundingRunConfig(rng_seed=config.rng_seed)
    tasks = [
        _BenchTask(
            k * len(alphas) + a,
            GeneratorParams.from_preset(preset, rng_seed=seed + k),
            alpha,
            spec,
            config,
            limits,
            rounding,
            exact_threshold,
        )
        for k in range(n_instances)
        for a, alpha in enumerate(alphas)
        for spec in specs
    ]
    logger.info(f"Benchmark on {preset}: {n_instances} instances x {len(alphas)} alphas x {len(specs)} schemes")

    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            rows = list(tqdm(pool.map(_run_task, tasks), total=len(tasks), disable=not progress, desc=preset))
    else:
        rows = [_run_task(task) for task in tqdm(tasks, disable=not progress, desc=preset)]

    runs = pd.DataFrame.from_records(rows)
    runs.insert(0, "preset", preset)
    unsolved = runs["upper_bound"].isna().sum() if len(runs) else 0
    if unsolved:
        logger.warning(f"{unsolved} runs produced no packed solution")
    return BenchmarkResult(runs, preset)
