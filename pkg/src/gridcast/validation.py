"""Input checks shared by the estimators."""

import numpy as np
from sklearn.utils.validation import check_array

from .grid import OccupancyGrid


def check_grid(grid) -> OccupancyGrid:
    """Accept an OccupancyGrid or a 2-D 0/1 array."""
    if isinstance(grid, OccupancyGrid):
        return grid
    arr = np.asarray(grid)
    if arr.ndim != 2:
        raise ValueError(f"expected an OccupancyGrid or a 2-D array, got shape {arr.shape}")
    return OccupancyGrid(arr)


def check_queries(X) -> np.ndarray:
    """Validate an ``(n, 3)`` array of ``(x, y, theta)`` rows as finite float64."""
    X = check_array(X, dtype=np.float64, ensure_2d=True, ensure_min_samples=0)
    if X.shape[1] != 3:
        raise ValueError(f"queries must have 3 columns (x, y, theta), got {X.shape[1]}")
    return X


def check_theta_disc(theta_disc) -> int:
    if int(theta_disc) != theta_disc or theta_disc < 4 or theta_disc % 2:
        raise ValueError(f"theta_disc must be an even integer >= 4, got {theta_disc}")
    return int(theta_disc)
