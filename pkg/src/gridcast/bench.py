"""Ray cast micro-benchmarks: grid and random sampling, timing statistics, reports.

Timing model
------------
Every query is timed on its own: the compiled kernel casts it ``batch_reps``
times in a serially dependent loop, the Python-side call overhead (measured
with ``reps=0``) is subtracted, and the remainder is divided by
``batch_reps``. ``batch_reps`` is chosen per method so one batch lasts at
least ``min_batch_seconds``. Repetition warms the caches, so ``mean``,
``median`` and the histogram describe hot per-query cost; ``stream_mean``
times the whole distinct query stream once (cold-ish access pattern) and is
what ``stream_mean``-based throughput figures should use.

Random queries come from numpy's Philox4x64-10 counter-based generator seeded
with the report's ``seed``; each query consumes three doubles in the order
x, y, theta: ``x = u0 * width``, ``y = u1 * height``, ``theta = u2 * 2*pi``.
"""

from __future__ import annotations

import csv
import gc
import io
import json
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .grid import OccupancyGrid
from .methods import RangeMethod

TWO_PI = 2.0 * math.pi

# log-spaced bucket edges from 1 ns to 1 ms, four per decade; two open-ended
# buckets catch anything outside
HIST_EDGES = tuple(10.0 ** (-9 + k / 4) for k in range(25))

DEFAULT_MIN_BATCH = 50e-6
MAX_REPS = 100_000


@dataclass
class BenchReport:
    method: str
    map_id: str
    mode: str
    theta_disc: int | None
    query_count: int
    mean: float
    median: float
    iqr: float
    p99: float
    min: float
    max: float
    stream_mean: float
    init_time: float
    memory_bytes: int
    checksum: float
    batch_reps: int
    seed: int | None = None
    strides: tuple[int, int, int] | None = None
    affinity: str = "unavailable"
    histogram_edges: list[float] = field(default_factory=lambda: list(HIST_EDGES))
    histogram_counts: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        if d["strides"] is not None:
            d["strides"] = list(d["strides"])
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "BenchReport":
        d = dict(d)
        if d.get("strides") is not None:
            d["strides"] = tuple(d["strides"])
        return cls(**d)


# ------------------------------------------------------------------ queries


def random_queries(grid: OccupancyGrid, n: int, seed: int) -> np.ndarray:
    if n < 1:
        raise ValueError(f"need at least one query, got {n}")
    u = np.random.Generator(np.random.Philox(seed)).random((n, 3))
    return u * np.array([grid.width, grid.height, TWO_PI])


def grid_queries(grid: OccupancyGrid, theta_disc: int, strides: Sequence[int]) -> np.ndarray:
    """Cell centres every ``sx``/``sy`` cells, every ``st``-th discrete heading.

    Rows are ordered y, then x, then heading (heading varies fastest).
    """
    sx, sy, st = (int(s) for s in strides)
    if min(sx, sy, st) < 1:
        raise ValueError(f"strides must be >= 1, got {tuple(strides)}")
    xs = np.arange(0, grid.width, sx) + 0.5
    ys = np.arange(0, grid.height, sy) + 0.5
    ts = np.arange(0, theta_disc, st) * (TWO_PI / theta_disc)
    if not (xs.size and ys.size and ts.size):
        raise ValueError("strides produce an empty lattice")
    Y, X, T = np.meshgrid(ys, xs, ts, indexing="ij")
    return np.column_stack([X.ravel(), Y.ravel(), T.ravel()])


# ------------------------------------------------------------------- timing


def _call_overhead(method: RangeMethod, q, samples: int = 200) -> float:
    x, y, t = q
    for _ in range(10):
        method._repeat(x, y, t, 0)
    clock = time.perf_counter_ns
    vals = np.empty(samples)
    for i in range(samples):
        t0 = clock()
        method._repeat(x, y, t, 0)
        vals[i] = clock() - t0
    return float(np.median(vals)) * 1e-9


def stream_time(method: RangeMethod, Q: np.ndarray, min_batch: float = 1e-3):
    """Mean seconds per query over the distinct stream, plus the ranges."""
    xs, ys, ts = (np.ascontiguousarray(Q[:, k]) for k in range(3))
    out = np.empty(Q.shape[0])
    method._batch(xs[:1], ys[:1], ts[:1], out[:1])  # compile / warm
    t0 = time.perf_counter()
    method._batch(xs, ys, ts, out)
    total = time.perf_counter() - t0
    # too short to trust: repeat until the batch is long enough
    reps = 1
    while total < min_batch and reps < 1 << 16:
        reps *= 4
        t0 = time.perf_counter()
        for _ in range(reps):
            method._batch(xs, ys, ts, out)
        total = time.perf_counter() - t0
    return total / (reps * Q.shape[0]), out


def per_query_times(method: RangeMethod, Q: np.ndarray, reps: int) -> np.ndarray:
    overhead = _call_overhead(method, Q[0])
    clock = time.perf_counter_ns
    rep = method._repeat
    out = np.empty(Q.shape[0])
    gc_was = gc.isenabled()
    gc.disable()
    try:
        for i in range(Q.shape[0]):
            x, y, t = Q[i, 0], Q[i, 1], Q[i, 2]
            t0 = clock()
            rep(x, y, t, reps)
            out[i] = clock() - t0
    finally:
        if gc_was:
            gc.enable()
    return np.maximum(out * 1e-9 - overhead, 0.0) / reps


def histogram(times: np.ndarray) -> list[int]:
    edges = np.asarray(HIST_EDGES)
    idx = np.searchsorted(edges, times, side="right")
    return np.bincount(idx, minlength=edges.size + 1).tolist()


def calibrate_reps(method: RangeMethod, Q: np.ndarray, min_batch: float,
                   pilot: int = 32, pilot_reps: int = 64) -> int:
    """Repetitions per query so one timed batch lasts about ``min_batch`` seconds."""
    idx = np.linspace(0, Q.shape[0] - 1, min(pilot, Q.shape[0])).astype(int)
    x, y, t = Q[0]
    method._repeat(x, y, t, 1)  # compile / warm
    t0 = time.perf_counter()
    for i in idx:
        method._repeat(Q[i, 0], Q[i, 1], Q[i, 2], pilot_reps)
    per_rep = (time.perf_counter() - t0) / (idx.size * pilot_reps)
    return int(min(MAX_REPS, max(1, math.ceil(min_batch / max(per_rep, 1e-10)))))


def _benchmark(method, Q, map_id, mode, min_batch, **extra) -> BenchReport:
    if not hasattr(method, "grid_"):
        raise ValueError("method must be fitted before benchmarking")
    theta_disc = extra.pop("theta_disc", getattr(method, "theta_disc", None))
    stream_mean, ranges = stream_time(method, Q)
    reps = calibrate_reps(method, Q, min_batch)
    times = per_query_times(method, Q, reps)
    q1, med, q3, p99 = np.percentile(times, [25, 50, 75, 99])
    return BenchReport(
        method=method.name,
        map_id=map_id,
        mode=mode,
        theta_disc=theta_disc,
        query_count=int(Q.shape[0]),
        mean=float(times.mean()),
        median=float(med),
        iqr=float(q3 - q1),
        p99=float(p99),
        min=float(times.min()),
        max=float(times.max()),
        stream_mean=float(stream_mean),
        init_time=float(getattr(method, "init_time_", 0.0)),
        memory_bytes=int(method.memory_bytes()),
        checksum=float(ranges.sum()),
        batch_reps=reps,
        histogram_counts=histogram(times),
        **extra,
    )


def run_grid_benchmark(method: RangeMethod, map_id: str, theta_disc: int = 216,
                       strides: Sequence[int] = (4, 4, 1),
                       min_batch_seconds: float = DEFAULT_MIN_BATCH) -> BenchReport:
    """Time every query of a uniform (x, y, theta) lattice over the fitted map."""
    td = getattr(method, "theta_disc", theta_disc)
    Q = grid_queries(method.grid_, td, strides)
    return _benchmark(method, Q, map_id, "grid", min_batch_seconds, theta_disc=td,
                      strides=tuple(int(s) for s in strides))


def run_random_benchmark(method: RangeMethod, map_id: str, n: int = 100_000, seed: int = 0,
                         min_batch_seconds: float = DEFAULT_MIN_BATCH) -> BenchReport:
    """Time ``n`` uniformly random queries drawn from a seeded Philox stream."""
    Q = random_queries(method.grid_, n, seed)
    return _benchmark(method, Q, map_id, "random", min_batch_seconds, seed=int(seed))


# ------------------------------------------------------------------ reports

TABLE_COLUMNS = ("Method", "Mean", "Median", "IQR", "Speedup")


def speedups(reports: Sequence[BenchReport]) -> list[float | None]:
    """Bresenham mean over each method's mean; ``None`` without a Bresenham report."""
    base = next((r for r in reports if r.method == "bl"), None)
    if base is None:
        return [None] * len(reports)
    return [base.mean / r.mean if r.mean > 0 else math.inf for r in reports]


def report_emit(reports: Iterable[BenchReport], fmt: str = "table") -> str:
    reports = list(reports)
    if not reports:
        raise ValueError("no reports to emit")
    maps = {r.map_id for r in reports}
    if len(maps) > 1:
        raise ValueError(f"reports span several maps {sorted(maps)}; speedups are undefined")
    ups = speedups(reports)
    if fmt == "table":
        rows = [TABLE_COLUMNS if ups[0] is not None else TABLE_COLUMNS[:-1]]
        for r, s in zip(reports, ups):
            row = [r.method.upper(), f"{r.mean:.3g}", f"{r.median:.3g}", f"{r.iqr:.3g}"]
            if s is not None:
                row.append(f"{s:.2f}")
            rows.append(row)
        widths = [max(len(row[i]) for row in rows) for i in range(len(rows[0]))]
        head = reports[0]
        title = f"{head.map_id}: {head.mode} sampling, {head.query_count} queries, seconds per query"
        lines = [title]
        for k, row in enumerate(rows):
            lines.append("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip())
            if k == 0:
                lines.append("  ".join("-" * w for w in widths))
        return "\n".join(lines) + "\n"
    if fmt == "csv":
        buf = io.StringIO()
        fields = list(reports[0].to_dict()) + ["speedup"]
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(fields)
        for r, s in zip(reports, ups):
            d = r.to_dict()
            row = []
            for k in fields[:-1]:
                v = d[k]
                row.append(";".join(str(x) for x in v) if isinstance(v, (list, tuple)) else
                           ("" if v is None else v))
            row.append("" if s is None else s)
            writer.writerow(row)
        return buf.getvalue()
    if fmt == "jsonl":
        lines = []
        for r, s in zip(reports, ups):
            d = r.to_dict()
            if s is not None:
                d["speedup"] = s
            lines.append(json.dumps(d, sort_keys=True))
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown format {fmt!r}; use table, csv or jsonl")
