import csv
import io
import json
import math

import numpy as np
import pytest

from gridcast import BresenhamLine, ExactCast, ZeroRange, make_method
from gridcast.bench import (HIST_EDGES, BenchReport, grid_queries, random_queries, report_emit,
                            run_grid_benchmark, run_random_benchmark, speedups)
from gridcast.maps import random_blocks

FAST = 2e-6  # keep timed batches tiny; tests check plumbing, not speed


@pytest.fixture(scope="module")
def small():
    return random_blocks(32, 32, seed=4)


def fitted(name, grid, **kw):
    return make_method(name, **kw).fit(grid)


def test_grid_lattice_layout(grid4):
    Q = grid_queries(grid4, 8, (2, 1, 4))
    assert Q.shape == (2 * 4 * 2, 3)
    np.testing.assert_array_equal(Q[:4], [[0.5, 0.5, 0.0], [0.5, 0.5, math.pi],
                                          [2.5, 0.5, 0.0], [2.5, 0.5, math.pi]])


@pytest.mark.parametrize("strides", [(0, 1, 1), (1, -2, 1), (1, 1, 0)])
def test_bad_strides(grid4, strides):
    with pytest.raises(ValueError):
        grid_queries(grid4, 8, strides)


def test_random_queries_reproducible(small):
    a = random_queries(small, 100, seed=7)
    np.testing.assert_array_equal(a, random_queries(small, 100, seed=7))
    assert not np.array_equal(a, random_queries(small, 100, seed=8))
    assert a.min() >= 0 and a[:, 0].max() < 32 and a[:, 2].max() < 2 * math.pi


def test_random_stream_is_philox(small):
    u = np.random.Generator(np.random.Philox(11)).random((5, 3))
    np.testing.assert_array_equal(random_queries(small, 5, 11), u * [32, 32, 2 * math.pi])


def test_random_needs_queries(small):
    with pytest.raises(ValueError):
        random_queries(small, 0, 0)


def test_grid_checksum_deterministic(small):
    m = fitted("cddt", small)
    a = run_grid_benchmark(m, "small", strides=(4, 4, 8), min_batch_seconds=FAST)
    b = run_grid_benchmark(m, "small", strides=(4, 4, 8), min_batch_seconds=FAST)
    assert a.checksum == b.checksum
    assert a.strides == (4, 4, 8) and a.theta_disc == 216 and a.mode == "grid"


def test_random_checksum_deterministic_and_seeded(small):
    m = fitted("bl", small)
    a = run_random_benchmark(m, "small", n=500, seed=3, min_batch_seconds=FAST)
    b = run_random_benchmark(m, "small", n=500, seed=3, min_batch_seconds=FAST)
    c = run_random_benchmark(m, "small", n=500, seed=4, min_batch_seconds=FAST)
    assert a.checksum == b.checksum != c.checksum
    assert (a.seed, c.seed) == (3, 4)


def test_cddt_and_lut_checksums_agree(small):
    reps = {n: run_grid_benchmark(fitted(n, small), "small", strides=(2, 2, 3),
                                  min_batch_seconds=FAST) for n in ("cddt", "pcddt", "lut")}
    n = reps["lut"].query_count
    assert abs(reps["cddt"].checksum - reps["lut"].checksum) <= 2.0 * n
    assert reps["cddt"].checksum == reps["pcddt"].checksum


def test_grid4_theta_zero_row(grid4):
    m = fitted("cddt", grid4, theta_disc=8)
    Q = grid_queries(grid4, 8, (1, 1, 8))
    big = m.max_range_
    expect = [3, 2, 1, 0, 1, 0, big, big, 2, 1, 0, big, 3, 2, 1, 0]
    np.testing.assert_allclose(m.predict(Q), expect)
    r = run_grid_benchmark(m, "grid4", strides=(1, 1, 8), min_batch_seconds=FAST)
    assert r.checksum == pytest.approx(sum(expect))


def test_report_statistics(small):
    r = run_random_benchmark(fitted("rm", small), "small", n=400, seed=0,
                             min_batch_seconds=FAST)
    assert r.query_count == 400
    assert sum(r.histogram_counts) == 400
    assert len(r.histogram_counts) == len(HIST_EDGES) + 1
    assert r.min <= r.median <= r.max
    assert r.min <= r.mean <= r.max
    assert r.iqr >= 0 and r.p99 <= r.max
    assert r.batch_reps >= 1 and r.stream_mean > 0
    assert r.memory_bytes > 0 and r.init_time >= 0
    assert r.affinity == "unavailable"


def test_unfitted_method_rejected(small):
    from gridcast.bench import _benchmark
    with pytest.raises(ValueError):
        _benchmark(BresenhamLine(), random_queries(small, 5, 0), "x", "random", FAST)


def test_noise_floor(small):
    r = run_random_benchmark(ZeroRange().fit(small), "small", n=2000, seed=0)
    assert r.median < 50e-9
    assert r.checksum == 0.0


@pytest.mark.xfail(strict=True, reason="Bresenham walks skip cells the continuous ray only "
                   "clips at a corner, so a few rays pass through thin obstacles")
def test_bresenham_within_1_5px_under_load():
    g = random_blocks(64, 64, seed=0)
    Q = random_queries(g, 100_000, seed=0)
    err = np.abs(BresenhamLine().fit(g).predict(Q) - ExactCast().fit(g).predict(Q))
    assert err.max() <= 1.5


# -------------------------------------------------------------------- reports


def fake(method, mean, map_id="m"):
    return BenchReport(method=method, map_id=map_id, mode="random", theta_disc=None,
                       query_count=10, mean=mean, median=mean, iqr=0.0, p99=mean, min=mean,
                       max=mean, stream_mean=mean, init_time=0.0, memory_bytes=1, checksum=1.0,
                       batch_reps=1, seed=0, histogram_counts=[0] * 25 + [10])


def test_speedups():
    assert speedups([fake("bl", 2e-7), fake("cddt", 5e-8)]) == [1.0, 4.0]
    assert speedups([fake("cddt", 5e-8)]) == [None]


def test_single_bl_speedup_is_one():
    text = report_emit([fake("bl", 1e-7)])
    header, rule, row = text.splitlines()[1:]
    assert header.split() == ["Method", "Mean", "Median", "IQR", "Speedup"]
    assert row.split()[0] == "BL" and row.split()[-1] == "1.00"


def test_table_without_bl_omits_speedup():
    header = report_emit([fake("lut", 1e-8)]).splitlines()[1]
    assert "Speedup" not in header


def test_jsonl_round_trip():
    reps = [fake("bl", 2e-7), fake("cddt", 5e-8)]
    lines = report_emit(reps, "jsonl").splitlines()
    for line, r in zip(lines, reps):
        d = json.loads(line)
        d.pop("speedup")
        assert BenchReport.from_dict(d) == r


def test_csv_constant_width():
    reps = [fake("bl", 2e-7), fake("cddt", 5e-8), fake("rm", 3e-7)]
    rows = list(csv.reader(io.StringIO(report_emit(reps, "csv"))))
    assert len(rows) == 4
    assert len({len(r) for r in rows}) == 1
    assert "histogram_counts" in rows[0] and rows[0][-1] == "speedup"


def test_mixed_maps_rejected():
    with pytest.raises(ValueError):
        report_emit([fake("bl", 1e-7, "a"), fake("cddt", 1e-8, "b")])


def test_bad_format_and_empty():
    with pytest.raises(ValueError):
        report_emit([fake("bl", 1e-7)], "xml")
    with pytest.raises(ValueError):
        report_emit([])
