"""
SVG figures for benchmark and policy results. The CSV output stays the source of truth.
"""

from collections.abc import Sequence
from os import PathLike
from pathlib import Path

import matplotlib as mpl

mpl.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

from stockshift.bench.policies import PolicySweepResult  # noqa: E402
from stockshift.bench.profiles import PerformanceProfile, common_taus  # noqa: E402

STYLE = {
    "font.size": 9,
    "axes.labelsize": 9,
    "legend.fontsize": 8,
    "xtick.labelsize": 8,
    "ytick.labelsize": 8,
    "svg.hashsalt": "stockshift",
}


def figure_path(out_dir: PathLike | str, experiment: str, metric: str) -> Path:
    return Path(out_dir) / f"{experiment}_{metric}.svg"


def plot_profiles(
    profiles: Sequence[PerformanceProfile], out_dir: PathLike | str, experiment: str, metric: str
) -> Path:
    path = figure_path(out_dir, experiment, metric)
    taus = common_taus(profiles)
    with mpl.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(5.0, 3.2))
        for profile in profiles:
            x, y = profile.steps(taus)
            ax.step(x, y, where="post", label=profile.name)
        ax.set_xlabel(r"ratio to best $\tau$")
        ax.set_ylabel(r"$\rho(\tau)$")
        ax.set_ylim(0.0, 1.02)
        ax.legend(loc="lower right")
        fig.tight_layout()
        fig.savefig(path, format="svg")
        plt.close(fig)
    return path


def plot_policy_sweep(result: PolicySweepResult, out_dir: PathLike | str, metric: str = "worsening") -> list[Path]:
    """One figure per alpha: mean worsening of each policy against the warehouse cost factor."""
    table = result.averages(metric)
    paths = []
    for alpha in table.index.get_level_values("alpha").unique():
        rows = table.xs(alpha, level="alpha")
        path = figure_path(out_dir, f"policies_alpha{alpha:g}", metric)
        with mpl.rc_context(STYLE):
            fig, ax = plt.subplots(figsize=(5.0, 3.2))
            for policy in rows.columns:
                ax.plot(rows.index, rows[policy], marker="o", label=policy)
            ax.set_xscale("log")
            ax.set_xlabel("warehouse cost factor")
            ax.set_ylabel(f"mean {metric.replace('_', ' ')}")
            ax.legend()
            fig.tight_layout()
            fig.savefig(path, format="svg")
            plt.close(fig)
        paths.append(path)
    return paths
