"""Range methods as scikit-learn style estimators.

A range method is *fitted* to an :class:`~gridcast.grid.OccupancyGrid` and
then *predicts* ranges for an ``(n, 3)`` array of ``(x, y, theta)`` queries in
continuous pixel coordinates::

    >>> from gridcast.maps import grid4
    >>> bl = BresenhamLine().fit(grid4())
    >>> bl.cast(0.5, 0.5, 0.0)
    3.0

Ranges are in pixels and always lie in ``[0, max_range_]``. The default
``max_range`` is the map diagonal. Queries whose origin is off the map return
``max_range_``.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import _kernels as K
from .grid import OccupancyGrid, distance_transform
from .validation import check_grid, check_queries, check_theta_disc

TWO_PI = 2.0 * math.pi
DEFAULT_THETA_DISC = 216
DEFAULT_LUT_CAP = 1 << 30


class LUTTooLargeError(MemoryError):
    def __init__(self, n_bytes: int, cap: int):
        super().__init__(f"lookup table needs {n_bytes} bytes, cap is {cap}")
        self.n_bytes = n_bytes
        self.cap = cap


@dataclass(frozen=True)
class RayQuery:
    """A ray origin in pixel coordinates plus heading, normalized to [0, 2*pi)."""

    x: float
    y: float
    theta: float

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(self.theta))

    def reversed(self) -> "RayQuery":
        return RayQuery(self.x, self.y, self.theta + math.pi)


@dataclass(frozen=True)
class RangeMethodConfig:
    max_range: float | None = None
    theta_disc: int = DEFAULT_THETA_DISC

    def __post_init__(self):
        check_theta_disc(self.theta_disc)
        if self.max_range is not None and not self.max_range > 0:
            raise ValueError(f"max_range must be positive, got {self.max_range}")

    def resolved_max_range(self, grid: OccupancyGrid) -> float:
        return float(self.max_range) if self.max_range is not None else grid.diagonal


def normalize_angle(theta: float) -> float:
    t = float(theta) % TWO_PI
    return 0.0 if t >= TWO_PI else t


def discrete_angles(theta_disc: int) -> np.ndarray:
    """The ``theta_disc`` headings ``i * 2*pi / theta_disc``."""
    return np.arange(theta_disc) * (TWO_PI / theta_disc)


class RangeMethod(BaseEstimator):
    """Common fit/predict plumbing. Subclasses provide ``_build`` and the kernels."""

    name = "base"

    def __init__(self, max_range=None):
        self.max_range = max_range

    # -- fitting

    def fit(self, grid, y=None):
        grid = check_grid(grid)
        if self.max_range is not None and not self.max_range > 0:
            raise ValueError(f"max_range must be positive, got {self.max_range}")
        self.grid_ = grid
        self.max_range_ = float(self.max_range) if self.max_range is not None else grid.diagonal
        start = time.perf_counter()
        self._build(grid)
        self.init_time_ = time.perf_counter() - start
        return self

    def _build(self, grid: OccupancyGrid) -> None:
        pass

    # -- queries

    def predict(self, X) -> np.ndarray:
        """Ranges for an ``(n, 3)`` array of ``(x, y, theta)`` rows."""
        check_is_fitted(self, "grid_")
        X = check_queries(X)
        out = np.empty(X.shape[0])
        self._batch(np.ascontiguousarray(X[:, 0]), np.ascontiguousarray(X[:, 1]),
                    np.ascontiguousarray(X[:, 2]), out)
        return out

    def cast(self, x: float, y: float, theta: float) -> float:
        check_is_fitted(self, "grid_")
        return float(self._cast(float(x), float(y), normalize_angle(theta)))

    def cast_query(self, q: RayQuery) -> float:
        return self.cast(q.x, q.y, q.theta)

    def predict_scan(self, poses, beam_offsets, partner=None) -> np.ndarray:
        """Ranges ``(n_poses, n_beams)`` for beams at ``theta + beam_offsets``.

        ``partner`` lets methods with a paired search share work between
        opposite beams; it does not change the result and is ignored here.
        """
        check_is_fitted(self, "grid_")
        P = check_queries(poses)
        offs = np.asarray(beam_offsets, dtype=np.float64).ravel()
        n, b = P.shape[0], offs.shape[0]
        Q = np.empty((n * b, 3))
        Q[:, 0] = np.repeat(P[:, 0], b)
        Q[:, 1] = np.repeat(P[:, 1], b)
        Q[:, 2] = (P[:, 2][:, None] + offs[None, :]).ravel()
        return self.predict(Q).reshape(n, b)

    def memory_bytes(self) -> int:
        check_is_fitted(self, "grid_")
        return self.grid_.width * self.grid_.height

    # -- hooks used by predict and the benchmark harness

    def _batch(self, xs, ys, ts, out) -> None:
        for i in range(xs.shape[0]):
            out[i] = self._cast(xs[i], ys[i], normalize_angle(ts[i]))

    def _cast(self, x, y, theta) -> float:
        raise NotImplementedError

    def _repeat(self, x, y, theta, reps) -> float:
        """Cast the same query ``reps`` times with a serial dependency; returns the sum."""
        raise NotImplementedError


class ExactCast(RangeMethod):
    """Ground truth: exact traversal of every cell the continuous ray enters."""

    name = "oracle"

    def _cast(self, x, y, theta):
        return K.oracle_cast(self.grid_.cells, x, y, theta, self.max_range_)

    def _batch(self, xs, ys, ts, out):
        K.oracle_batch(self.grid_.cells, xs, ys, ts, self.max_range_, out)

    def _repeat(self, x, y, theta, reps):
        return _repeat_oracle(self.grid_.cells, x, y, theta, self.max_range_, reps)


class BresenhamLine(RangeMethod):
    """Bresenham's line walk; distance is measured to the hit cell's centre."""

    name = "bl"

    def _cast(self, x, y, theta):
        return K.bresenham_cast(self.grid_.cells, x, y, theta, self.max_range_)

    def _batch(self, xs, ys, ts, out):
        K.bresenham_batch(self.grid_.cells, xs, ys, ts, self.max_range_, out)

    def _repeat(self, x, y, theta, reps):
        return _repeat_bresenham(self.grid_.cells, x, y, theta, self.max_range_, reps)


class RayMarching(RangeMethod):
    """Sphere tracing over the exact Euclidean distance transform."""

    name = "rm"

    def _build(self, grid):
        self.distance_field_ = distance_transform(grid)

    def memory_bytes(self):
        check_is_fitted(self, "grid_")
        return super().memory_bytes() + self.distance_field_.values.nbytes

    def _cast(self, x, y, theta):
        return K.ray_march_cast(self.grid_.cells, self.distance_field_.values, x, y, theta,
                                self.max_range_)

    def _batch(self, xs, ys, ts, out):
        K.ray_march_batch(self.grid_.cells, self.distance_field_.values, xs, ys, ts,
                          self.max_range_, out)

    def _repeat(self, x, y, theta, reps):
        return _repeat_ray_march(self.grid_.cells, self.distance_field_.values, x, y, theta,
                                 self.max_range_, reps)


class LookupTable(RangeMethod):
    """Dense ``(y, x, theta)`` table of 16-bit ranges cast from every cell centre.

    Entries are oracle ranges rounded half-up. A ray that never hits within
    ``max_range`` is stored as the table's top code ``min(floor(max_range),
    65535)`` (at least 1) and read back as ``max_range_``. Lookups use the cell containing
    the query, and the nearest discrete heading; there is no interpolation.
    """

    name = "lut"

    def __init__(self, theta_disc=DEFAULT_THETA_DISC, max_range=None, max_bytes=DEFAULT_LUT_CAP):
        self.theta_disc = theta_disc
        self.max_range = max_range
        self.max_bytes = max_bytes

    @staticmethod
    def projected_bytes(grid: OccupancyGrid, theta_disc: int) -> int:
        return grid.width * grid.height * theta_disc * 2

    def _build(self, grid):
        check_theta_disc(self.theta_disc)
        n_bytes = self.projected_bytes(grid, self.theta_disc)
        if self.max_bytes is not None and n_bytes > self.max_bytes:
            raise LUTTooLargeError(n_bytes, self.max_bytes)
        # code 0 must stay free for occupied origins
        self.max_code_ = int(max(1, min(math.floor(self.max_range_), 65535)))
        table = np.empty((grid.height, grid.width, self.theta_disc), dtype=np.uint16)
        K.lut_fill(grid.cells, self.theta_disc, self.max_range_, self.max_code_, table)
        self.table_ = table

    def slice(self, i: int) -> np.ndarray:
        """Raw ``(height, width)`` table slice for heading index ``i``."""
        check_is_fitted(self, "table_")
        return self.table_[:, :, i]

    def memory_bytes(self):
        check_is_fitted(self, "table_")
        return int(self.table_.nbytes)

    def _cast(self, x, y, theta):
        return K.lut_cast(self.table_, self.theta_disc, self.max_code_, x, y, theta,
                          self.max_range_)

    def _batch(self, xs, ys, ts, out):
        K.lut_batch(self.table_, self.theta_disc, self.max_code_, xs, ys, ts, self.max_range_, out)

    def _repeat(self, x, y, theta, reps):
        return _repeat_lut(self.table_, self.theta_disc, self.max_code_, x, y, theta,
                           self.max_range_, reps)


class ZeroRange(RangeMethod):
    """Always returns 0; measures the timing harness noise floor."""

    name = "zero"

    def _cast(self, x, y, theta):
        return 0.0

    def _batch(self, xs, ys, ts, out):
        out[:] = 0.0

    def _repeat(self, x, y, theta, reps):
        return _repeat_zero(x, y, theta, reps)


# Repetition kernels for per-query timing. Feeding ``0.0 * acc`` back into the
# origin makes every cast depend on the previous one, so the compiler can
# neither hoist the cast out of the loop nor overlap iterations.


@K.hot_kernel
def _repeat_oracle(cells, x, y, t, max_range, reps):
    acc = 0.0
    for _ in range(reps):
        acc += K.oracle_cast(cells, x + 0.0 * acc, y, t, max_range)
    return acc


@K.hot_kernel
def _repeat_bresenham(cells, x, y, t, max_range, reps):
    acc = 0.0
    for _ in range(reps):
        acc += K.bresenham_cast(cells, x + 0.0 * acc, y, t, max_range)
    return acc


@K.hot_kernel
def _repeat_ray_march(cells, dist, x, y, t, max_range, reps):
    acc = 0.0
    for _ in range(reps):
        acc += K.ray_march_cast(cells, dist, x + 0.0 * acc, y, t, max_range)
    return acc


@K.hot_kernel
def _repeat_lut(table, theta_disc, max_code, x, y, t, max_range, reps):
    acc = 0.0
    for _ in range(reps):
        acc += K.lut_cast(table, theta_disc, max_code, x + 0.0 * acc, y, t, max_range)
    return acc


@K.hot_kernel
def _repeat_zero(x, y, t, reps):
    acc = 0.0
    for _ in range(reps):
        acc += 0.0 * (x + 0.0 * acc)
    return acc
