import dataclasses
from collections.abc import Sequence

import numpy as np


class ProfileError(ValueError):
    pass


@dataclasses.dataclass(frozen=True)
class PerformanceProfile:
    """
    Fraction of instances on which a configuration is within a factor tau of the best one.
    Failed runs carry an infinite ratio and never count.
    """

    name: str
    ratios: np.ndarray

    @property
    def n_instances(self) -> int:
        return len(self.ratios)

    def rho(self, tau: float) -> float:
        if not self.n_instances:
            return 0.0
        return float(np.count_nonzero(self.ratios <= tau)) / self.n_instances

    def steps(self, taus: np.ndarray | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Right-continuous step function evaluated on `taus` (default: this profile's own finite ratios)."""
        if taus is None:
            taus = np.unique(self.ratios[np.isfinite(self.ratios)])
        if len(taus) == 0:
            taus = np.array([1.0])
        return taus, np.array([self.rho(t) for t in taus])


def performance_ratios(values) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    if values.ndim != 2:
        msg = f"expected a configs x instances matrix, got shape {values.shape}"
        raise ProfileError(msg)
    solved = np.isfinite(values)
    if (values[solved] <= 0).any():
        msg = "performance profiles need strictly positive values"
        raise ProfileError(msg)
    masked = np.where(solved, values, np.inf)
    best = masked.min(axis=0) if values.shape[0] else np.zeros(values.shape[1])
    with np.errstate(invalid="ignore", divide="ignore"):
        ratios = np.where(solved & np.isfinite(best), masked / best, np.inf)
    return ratios


def performance_profile(values, names: Sequence[str] | None = None) -> list[PerformanceProfile]:
    """One profile per row of `values` (configurations x instances); NaN and inf mark failures."""
    ratios = performance_ratios(values)
    names = list(names) if names is not None else [f"config{k}" for k in range(ratios.shape[0])]
    if len(names) != ratios.shape[0]:
        msg = f"{len(names)} names for {ratios.shape[0]} configurations"
        raise ProfileError(msg)
    return [PerformanceProfile(name, ratios[k]) for k, name in enumerate(names)]


def common_taus(profiles: Sequence[PerformanceProfile]) -> np.ndarray:
    """Union of every finite ratio across profiles, for plotting them on one axis."""
    finite = [p.ratios[np.isfinite(p.ratios)] for p in profiles]
    taus = np.unique(np.concatenate(finite)) if finite else np.array([])
    return taus if len(taus) else np.array([1.0])
