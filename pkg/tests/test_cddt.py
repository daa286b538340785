import math
from collections import Counter

import numpy as np
import pytest

from gridcast import (CDDT, PCDDT, ExactCast, OccupancyGrid, SliceProjection,
                      UpdateDisabledError, discrete_angles, edge_map, reconstruct_row)
from gridcast.cddt import SLICE_OVERHEAD_BYTES, slice_parameters
from gridcast.maps import random_blocks, structured_map

from conftest import random_queries

TD = 216


def all_discrete_states(grid, theta_disc):
    ys, xs = np.mgrid[0:grid.height, 0:grid.width]
    ts = discrete_angles(theta_disc)
    n = xs.size
    return np.column_stack([np.repeat(xs.ravel() + 0.5, theta_disc),
                            np.repeat(ys.ravel() + 0.5, theta_disc),
                            np.tile(ts, n)])


def discrete_queries(grid, n, theta_disc, seed):
    r = np.random.default_rng(seed)
    Q = r.random((n, 3)) * [grid.width, grid.height, 1.0]
    Q[:, 2] = r.integers(0, theta_disc, n) * (2 * math.pi / theta_disc)
    return Q


def multiset(c):
    return Counter((s, b, float(v)) for s in range(c.n_slices)
                   for b, pts in enumerate(c.bins(s)) for v in pts)


# ---------------------------------------------------------------- projection


def test_identity_slice(grid4):
    c = CDDT(theta_disc=8).fit(grid4)
    sp = c.slices_[0]
    assert sp.y_offset == 0.0
    assert sp.project(2.25, 3.5) == (2.25, 3.5)


def test_quarter_turn_projection():
    # corners (0,0), (4,0), (0,4), (4,4) rotate to y' in {0, -4, 4, 0}: offset 4
    theta, c, s, yoff, count = slice_parameters(4, 4, 2)
    sp = SliceProjection(theta[1], c[1], s[1], yoff[1], int(count[1]))
    assert sp.y_offset == pytest.approx(4.0)
    xp, yp = sp.project(3.0, 0.0)
    assert xp == pytest.approx(0.0, abs=1e-12)
    assert yp == pytest.approx(1.0)


def test_projection_is_rigid(rng):
    theta, c, s, yoff, count = slice_parameters(50, 30, 54)
    for i in rng.integers(0, 54, 20):
        sp = SliceProjection(theta[i], c[i], s[i], yoff[i], int(count[i]))
        p, q = rng.random(2) * [50, 30], rng.random(2) * [50, 30]
        assert np.hypot(*np.subtract(sp.project(*p), sp.project(*q))) == \
            pytest.approx(np.hypot(*(p - q)))


def test_projected_map_fits_in_bins():
    theta, c, s, yoff, count = slice_parameters(37, 21, 30)
    xs, ys = np.meshgrid([0.0, 37.0], [0.0, 21.0])
    for i in range(30):
        yp = -xs * s[i] + ys * c[i] + yoff[i]
        assert yp.min() >= -1e-9
        assert yp.max() < count[i]


# ---------------------------------------------------------------------- build


def test_grid4_bins(grid4):
    c = CDDT(theta_disc=8).fit(grid4)
    assert [c.bin(0, r).tolist() for r in range(4)] == [[3.5], [1.5], [2.5], [3.5]]


def test_empty_grid_has_no_points():
    c = CDDT(theta_disc=16).fit(OccupancyGrid(np.zeros((10, 12), np.uint8)))
    assert c.n_zero_points() == 0
    assert all(b.size == 0 for s in range(c.n_slices) for b in c.bins(s))
    assert c.memory_bytes() == math.ceil(120 / 8) + SLICE_OVERHEAD_BYTES * 8
    assert c.cast(3.0, 4.0, 1.0) == c.max_range_


def test_bins_are_sorted(blocks64):
    c = CDDT(theta_disc=36).fit(blocks64[0])
    for s in range(c.n_slices):
        for b in c.bins(s):
            assert np.all(np.diff(b) >= 0)


def test_only_edge_pixels_are_stored():
    cells = np.zeros((9, 9), np.uint8)
    cells[2:7, 2:7] = 1
    g = OccupancyGrid(cells)
    c = CDDT(theta_disc=4).fit(g)
    assert np.array_equal(c.membership_, edge_map(g).cells.astype(bool))
    # 16 ring pixels in slice 0 each cover exactly one bin
    assert sum(b.size for b in c.bins(0)) == 16


def test_zero_point_count_bound(blocks64):
    for g in blocks64:
        c = CDDT(theta_disc=TD).fit(g)
        assert c.n_zero_points() <= edge_map(g).cells.sum() * c.n_slices * 3


def test_max_bin_length_bounded_by_diagonal(blocks64):
    for g in blocks64 + [structured_map(128)]:
        assert CDDT(theta_disc=TD).fit(g).max_bin_length() <= g.diagonal


# --------------------------------------------------------------------- memory


def test_memory_formula(blocks64):
    c = CDDT(theta_disc=TD).fit(blocks64[1])
    assert c.memory_bytes() == 4 * c.n_zero_points() + 64 * 64 // 8 + 32 * (TD // 2)


def test_zero_points_linear_in_theta_disc():
    g = structured_map(128)
    a = CDDT(theta_disc=TD).fit(g).n_zero_points()
    b = CDDT(theta_disc=2 * TD).fit(g).n_zero_points()
    assert b / (2 * a) == pytest.approx(1.0, rel=0.01)


def test_zero_points_linear_in_edge_count():
    base = structured_map(64).cells
    per_edge = []
    for k in (1, 2, 4):
        g = OccupancyGrid(np.kron(base, np.ones((k, k), np.uint8)))
        per_edge.append(CDDT(theta_disc=TD).fit(g).n_zero_points() / edge_map(g).cells.sum())
    assert max(per_edge) / min(per_edge) < 1.10


def test_memory_stable_across_fits(blocks64):
    assert CDDT().fit(blocks64[2]).memory_bytes() == CDDT().fit(blocks64[2]).memory_bytes()


# ---------------------------------------------------------------------- casts


def test_grid4_casts(grid4):
    c = CDDT(theta_disc=8).fit(grid4)
    assert c.cast(0.5, 0.5, 0.0) == 3.0
    assert c.cast(2.5, 1.5, 0.0) == c.max_range_
    assert c.cast(2.5, 0.5, math.pi) == c.max_range_
    assert c.cast(2.5, 1.5, math.pi) == 1.0
    assert c.cast(1.5, 1.5, 0.0) == 0.0  # origin inside an obstacle
    assert c.cast(4.5, 0.5, math.pi) == c.max_range_  # origin off the map


def test_cardinal_directions_are_centre_distances(blocks64):
    g = blocks64[0]
    c = CDDT(theta_disc=TD).fit(g)
    o = ExactCast().fit(g)
    ys, xs = np.nonzero(g.cells == 0)
    for t in (0.0, math.pi / 2, math.pi, 3 * math.pi / 2):
        Q = np.column_stack([xs + 0.5, ys + 0.5, np.full(xs.size, t)])
        ref = o.predict(Q)
        hit = ref < o.max_range_
        np.testing.assert_allclose(c.predict(Q)[hit], ref[hit] + 0.5, atol=1e-4)


def test_heading_is_rounded_to_nearest_slice(blocks64):
    g = blocks64[1]
    c = CDDT(theta_disc=TD).fit(g)
    Q = random_queries(g, 4000, seed=3)
    R = Q.copy()
    R[:, 2] = np.floor(Q[:, 2] * TD / (2 * math.pi) + 0.5) % TD * (2 * math.pi / TD)
    np.testing.assert_array_equal(c.predict(Q), c.predict(R))


def test_never_overshoots_oracle_by_more_than_2px(blocks64):
    for s, g in enumerate(blocks64):
        Q = discrete_queries(g, 10_000, TD, seed=s)
        d = CDDT(theta_disc=TD).fit(g).predict(Q) - ExactCast().fit(g).predict(Q)
        assert (d > 2.0).sum() == 0


def test_mostly_close_to_oracle(blocks64):
    g = blocks64[0]
    Q = discrete_queries(g, 10_000, TD, seed=0)
    err = np.abs(CDDT(theta_disc=TD).fit(g).predict(Q) - ExactCast().fit(g).predict(Q))
    assert np.median(err) < 0.75
    assert (err > 2.0).mean() < 0.15


@pytest.mark.xfail(strict=True, reason="the four-corner bin span registers cells the ray only "
                   "grazes in the rotated frame, so some casts stop early by many pixels")
def test_discrete_angle_casts_within_2px_of_oracle(blocks64):
    for s, g in enumerate(blocks64):
        Q = discrete_queries(g, 10_000, TD, seed=s)
        err = np.abs(CDDT(theta_disc=TD).fit(g).predict(Q) - ExactCast().fit(g).predict(Q))
        assert err.max() <= 2.0


def test_dynamic_and_static_casts_agree(blocks64):
    g = blocks64[2]
    Q = random_queries(g, 2000, seed=9)
    a = CDDT(theta_disc=TD).fit(g)
    b = CDDT(theta_disc=TD, dynamic=True).fit(g)
    np.testing.assert_array_equal(a.predict(Q), b.predict(Q))
    assert [b.cast(*q) for q in Q[:300]] == [a.cast(*q) for q in Q[:300]]


# ------------------------------------------------------------------ cast_pair


def test_cast_pair_matches_two_casts(blocks64):
    for g in blocks64:
        c = CDDT(theta_disc=TD).fit(g)
        Q = random_queries(g, 3000, seed=1)
        fwd, bwd = c.predict_pairs(Q)
        back = Q.copy()
        back[:, 2] += math.pi
        np.testing.assert_array_equal(fwd, c.predict(Q))
        np.testing.assert_array_equal(bwd, c.predict(back))


def test_cast_pair_between_two_points():
    cells = np.zeros((1, 5), np.uint8)
    cells[0, [1, 3]] = 1
    c = CDDT(theta_disc=8).fit(OccupancyGrid(cells))
    assert c.bin(0, 0).tolist() == [1.5, 3.5]
    assert c.cast_pair(2.5, 0.5, 0.0) == (1.0, 1.0)


def test_cast_pair_before_first_point(grid4):
    c = CDDT(theta_disc=8).fit(grid4)
    assert c.cast_pair(0.5, 0.5, 0.0) == (3.0, c.max_range_)


def test_predict_scan_pairing_is_transparent(blocks64):
    g = blocks64[0]
    c = CDDT(theta_disc=TD).fit(g)
    offs = np.linspace(-0.75 * math.pi, 0.75 * math.pi, 61)
    partner = np.full(61, -1)
    for i in range(61):
        j = int(np.argmin(np.abs(np.angle(np.exp(1j * (offs - offs[i] - math.pi))))))
        if j > i and abs(np.angle(np.exp(1j * (offs[j] - offs[i] - math.pi)))) < 1e-9:
            partner[i], partner[j] = j, i
    assert (partner >= 0).sum() > 0
    P = random_queries(g, 200, seed=4)
    plain = c.predict_scan(P, offs)
    np.testing.assert_array_equal(c.predict_scan(P, offs, partner), plain)
    Q = np.column_stack([np.repeat(P[:, 0], 61), np.repeat(P[:, 1], 61),
                         (P[:, 2:3] + offs).ravel()])
    np.testing.assert_array_equal(plain.ravel(), c.predict(Q))


# -------------------------------------------------------------------- pruning


@pytest.mark.parametrize("seed", [0, 1])
def test_prune_preserves_discrete_states(seed):
    g = random_blocks(48, 40, seed=seed)
    c = CDDT(theta_disc=72).fit(g)
    p = c.prune()
    Q = all_discrete_states(g, 72)
    np.testing.assert_array_equal(p.predict(Q), c.predict(Q))
    fp, bp = p.predict_pairs(Q)
    fc, bc = c.predict_pairs(Q)
    np.testing.assert_array_equal(fp, fc)
    np.testing.assert_array_equal(bp, bc)
    assert p.n_zero_points() <= c.n_zero_points()
    assert p.pruned_ and not c.pruned_


def test_prune_example_map_shrinks():
    c = CDDT(theta_disc=TD).fit(structured_map(64))
    p = c.prune()
    assert p.n_zero_points() < c.n_zero_points()
    assert p.memory_bytes() < c.memory_bytes()


def test_prune_collinear_line():
    cells = np.zeros((20, 20), np.uint8)
    cells[5, 5:15] = 1
    c = CDDT(theta_disc=8).fit(OccupancyGrid(cells))
    assert c.bin(0, 5).size == 10
    assert c.prune().bin(0, 5).size <= 2


def test_pcddt_estimator_equals_pruned_cddt(blocks64):
    g = blocks64[1]
    a = PCDDT(theta_disc=TD).fit(g)
    b = CDDT(theta_disc=TD).fit(g).prune()
    assert a.n_zero_points() == b.n_zero_points()
    Q = random_queries(g, 2000, seed=2)
    np.testing.assert_array_equal(a.predict(Q), b.predict(Q))


def test_pruned_structure_rejects_edits(grid4):
    p = CDDT(theta_disc=8, dynamic=True).fit(grid4).prune()
    with pytest.raises(UpdateDisabledError):
        p.set_occupancy(0, 0, True)
    with pytest.raises(UpdateDisabledError):
        PCDDT(theta_disc=8).fit(grid4).set_occupancy(0, 0, True)


# -------------------------------------------------------- incremental updates


def test_static_structure_rejects_edits(grid4):
    with pytest.raises(UpdateDisabledError):
        CDDT(theta_disc=8).fit(grid4).set_occupancy(0, 0, True)


def test_out_of_bounds_edit(grid4):
    with pytest.raises(IndexError):
        CDDT(theta_disc=8, dynamic=True).fit(grid4).set_occupancy(4, 0, True)


def test_noop_edit(grid4):
    c = CDDT(theta_disc=8, dynamic=True).fit(grid4)
    before = multiset(c)
    c.set_occupancy(3, 0, True)
    c.set_occupancy(0, 0, False)
    assert multiset(c) == before


def test_insert_then_remove_restores_bins(blocks64):
    c = CDDT(theta_disc=36, dynamic=True).fit(blocks64[0])
    before = multiset(c)
    free = np.argwhere(blocks64[0].cells == 0)
    for y, x in free[:: max(1, len(free) // 15)][:15]:
        c.set_occupancy(int(x), int(y), True)
        c.set_occupancy(int(x), int(y), False)
        assert multiset(c) == before


def test_removal_reveals_interior_pixel():
    cells = np.zeros((7, 7), np.uint8)
    cells[2:5, 2:5] = 1
    c = CDDT(theta_disc=8, dynamic=True).fit(OccupancyGrid(cells))
    assert not c.membership_[3, 3]
    c.set_occupancy(2, 3, False)
    assert c.membership_[3, 3]
    assert 3.5 in c.bin(0, 3).tolist()
    assert c.cast(2.5, 3.5, 0.0) == 1.0


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_random_edits_match_fresh_build(seed):
    r = np.random.default_rng(seed)
    g = random_blocks(32, 32, seed=seed + 10)
    c = CDDT(theta_disc=36, dynamic=True).fit(g)
    cells = g.cells.copy()
    for _ in range(200):
        x, y = (int(v) for v in r.integers(0, 32, 2))
        occ = bool(r.random() < 0.5)
        c.set_occupancy(x, y, occ)
        cells[y, x] = occ
    assert np.array_equal(c.grid.cells, cells)
    fresh = CDDT(theta_disc=36).fit(OccupancyGrid(cells))
    Q = all_discrete_states(fresh.grid_, 36)
    np.testing.assert_array_equal(c.predict(Q), fresh.predict(Q))
    # incremental bins hold the fresh ones plus, at most, points of occupied cells
    extra = multiset(c) - multiset(fresh)
    assert not (multiset(fresh) - multiset(c))
    member = c.membership_
    assert np.all(cells[member]) and np.all(member[edge_map(fresh.grid_).cells.astype(bool)])
    assert sum(extra.values()) <= c.n_zero_points()


# -------------------------------------------------------------- serialization


def test_round_trip_is_bit_exact(blocks64):
    for c in (CDDT(theta_disc=TD).fit(blocks64[0]), PCDDT(theta_disc=TD).fit(blocks64[0])):
        data = c.to_bytes()
        back = type(c).from_bytes(data)
        assert back.to_bytes() == data
        assert back.pruned_ == c.pruned_
        Q = random_queries(blocks64[0], 1000, seed=0)
        np.testing.assert_array_equal(back.predict(Q), c.predict(Q))


def test_round_trip_dynamic(grid4):
    c = CDDT(theta_disc=8).fit(grid4)
    d = CDDT.from_bytes(c.to_bytes(), dynamic=True)
    d.set_occupancy(0, 3, True)
    assert d.cast(0.5, 2.5, math.pi / 2) == 1.0


def test_header_fields(grid4):
    data = CDDT(theta_disc=8).fit(grid4).to_bytes()
    assert data[:4] == b"CDDT"
    assert int.from_bytes(data[6:10], "little") == 4
    assert int.from_bytes(data[14:18], "little") == 8


@pytest.mark.parametrize("mangle", [
    lambda d: b"XDDT" + d[4:],
    lambda d: d[:4] + b"\x09\x00" + d[6:],
    lambda d: d[:-3],
    lambda d: d + b"\x00",
    lambda d: d[:10],
])
def test_corrupt_payload_rejected(grid4, mangle):
    data = CDDT(theta_disc=8).fit(grid4).to_bytes()
    with pytest.raises(ValueError):
        CDDT.from_bytes(mangle(data))


# ------------------------------------------------------------ row decompression


def test_reconstruct_row_sawtooth():
    row = reconstruct_row([3.5], 4, max_range=9.0)
    # the last sample sits on the zero point itself; a strict successor search
    # finds nothing there (a real cast answers 0 from the occupancy check)
    assert row.tolist() == [3.0, 2.0, 1.0, 9.0]


def test_reconstruct_row_empty():
    assert reconstruct_row([], 5, "backward", max_range=7.0).tolist() == [7.0] * 5


def test_reconstruct_row_mirror_symmetry(rng):
    L = 40
    pts = np.sort(rng.random(6) * L)
    fwd = reconstruct_row(pts, L, "forward", max_range=99.0)
    bwd = reconstruct_row(np.sort(L - pts), L, "backward", max_range=99.0)
    np.testing.assert_allclose(fwd, bwd[::-1], atol=1e-9)


def test_reconstruct_row_bad_direction():
    with pytest.raises(ValueError):
        reconstruct_row([1.0], 3, "sideways")


def _oracle_row_errors(g, c, slice_step=9, bin_step=3):
    o = ExactCast().fit(g)
    errs = []
    L = int(math.ceil(g.diagonal))
    for si in range(0, c.n_slices, slice_step):
        sp = c.slices_[si]
        for b in range(0, sp.bin_count, bin_step):
            t = np.arange(L) + 0.5
            yp = b + 0.5 - sp.y_offset
            x = t * sp.cos - yp * sp.sin
            y = t * sp.sin + yp * sp.cos
            m = (x >= 0) & (x < g.width) & (y >= 0) & (y < g.height)
            if not m.any():
                continue
            xi, yi = x[m].astype(int), y[m].astype(int)
            free = g.cells[yi, xi] == 0
            Q = np.column_stack([x[m][free], y[m][free], np.full(free.sum(), sp.theta)])
            errs.append(np.abs(c.reconstruct_row(si, b, L)[m][free] - o.predict(Q)))
    return np.concatenate(errs)


def test_reconstruct_row_axis_slice_matches_oracle(blocks64):
    g = blocks64[0]
    c = CDDT(theta_disc=TD).fit(g)
    assert _oracle_row_errors(g, c, slice_step=TD, bin_step=1).max() <= 1.0


@pytest.mark.xfail(strict=True, reason="zero points from corner-grazed pixels make some rows "
                   "stop short of the true obstacle")
def test_reconstruct_row_matches_oracle_rows(blocks64):
    g = blocks64[0]
    c = CDDT(theta_disc=TD).fit(g)
    assert _oracle_row_errors(g, c).max() <= 1.0
