import numpy as np

INTEGRALITY_TOL = 1e-6


def snap_integral(values: np.ndarray, tol: float = INTEGRALITY_TOL) -> np.ndarray:
    """Replace entries within `tol` of an integer by that integer."""
    values = np.asarray(values, dtype=float)
    nearest = np.rint(values)
    return np.where(np.abs(values - nearest) <= tol, nearest, values)


def relative_gap(incumbent: float, bound: float) -> float:
    return max(0.0, incumbent - bound) / max(1.0, abs(incumbent))
