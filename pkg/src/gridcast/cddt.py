"""Compressed Directional Distance Transform.

For each of ``S = theta_disc / 2`` headings ``theta_i = i * pi / S`` the map
is rotated by ``-theta_i`` so that rays along ``theta_i`` run along +x'. Each
row (bin) of the rotated map keeps only the x' coordinates of the obstacle
pixels overlapping it. A cast projects the query, picks the bin, and binary
searches for the successor (heading in ``[0, pi)``) or predecessor (heading in
``[pi, 2*pi)``, same slice read backwards).

Only edge pixels are stored; a query starting inside an obstacle is answered
by the occupancy check before any bin is touched.
"""

from __future__ import annotations

import bisect
import math
import struct
from dataclasses import dataclass

import numpy as np
from numba import njit
from sklearn.utils.validation import check_is_fitted

from ._kernels import TWO_PI, angle_index, hot_kernel, normalize_angle
from .grid import OccupancyGrid, edge_map
from .methods import DEFAULT_THETA_DISC, RangeMethod
from .validation import check_queries, check_theta_disc

# Snap tolerance for bin overlap: axis-aligned slices carry ~1e-16 rotation
# noise that would otherwise leak a pixel into a neighbouring bin.
_SPAN_EPS = 1e-9

# cos, sin, y_offset (f64) + bin_count, first_bin (u32)
SLICE_OVERHEAD_BYTES = 32

MAGIC = b"CDDT"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sHIIIB3xdd")


class UpdateDisabledError(RuntimeError):
    """Raised when editing a pruned or static structure."""


@dataclass(frozen=True)
class SliceProjection:
    """Rigid map-to-slice transform for one heading."""

    theta: float
    cos: float
    sin: float
    y_offset: float
    bin_count: int

    def project(self, x: float, y: float) -> tuple[float, float]:
        return (x * self.cos + y * self.sin,
                -x * self.sin + y * self.cos + self.y_offset)


def slice_parameters(width: int, height: int, n_slices: int):
    """Per-slice ``(theta, cos, sin, y_offset, bin_count)`` arrays.

    ``y_offset`` is the smallest shift keeping every map corner at y' >= 0;
    ``bin_count`` is ``ceil(max corner y') + 1``.
    """
    theta = np.arange(n_slices) * (math.pi / n_slices)
    c = np.cos(theta)
    s = np.sin(theta)
    corner_x = np.array([0.0, width, 0.0, width])[:, None]
    corner_y = np.array([0.0, 0.0, height, height])[:, None]
    y_rot = -corner_x * s + corner_y * c
    y_offset = -y_rot.min(axis=0) + 0.0
    bin_count = np.ceil(y_rot.max(axis=0) + y_offset - _SPAN_EPS).astype(np.int64) + 1
    return theta, c, s, y_offset, bin_count


def zero_points(xs, ys, cos, sin, y_offset, bin_count):
    """Zero points of pixels ``(xs, ys)`` in every slice.

    Returns flat ``(slice, bin, x')`` arrays. x' is the projected pixel centre
    (float32); the pixel lands in every bin its projected unit square
    overlaps. Building and incremental updates both go through here, so a
    pixel's stored x' values are reproduced bit for bit on removal.
    """
    xs = np.asarray(xs, dtype=np.float64)[:, None]
    ys = np.asarray(ys, dtype=np.float64)[:, None]
    xp = ((xs + 0.5) * cos + (ys + 0.5) * sin).astype(np.float32)
    corners = np.stack([-(xs + dx) * sin + (ys + dy) * cos + y_offset
                        for dx in (0.0, 1.0) for dy in (0.0, 1.0)])
    lo = np.floor(corners.min(axis=0) + _SPAN_EPS).astype(np.int64)
    hi = np.ceil(corners.max(axis=0) - _SPAN_EPS).astype(np.int64) - 1
    top = bin_count[None, :] - 1
    lo = np.clip(lo, 0, top)
    hi = np.clip(hi, 0, top)
    slice_idx = np.broadcast_to(np.arange(cos.shape[0]), xp.shape)
    out_s, out_b, out_x = [], [], []
    for k in range(3):
        m = lo + k <= hi
        out_s.append(slice_idx[m])
        out_b.append((lo + k)[m])
        out_x.append(xp[m])
    return np.concatenate(out_s), np.concatenate(out_b), np.concatenate(out_x)


# ------------------------------------------------------------------ kernels


@njit(cache=True, inline="always")
def _bisect_right(a, v, lo, hi):
    while lo < hi:
        mid = (lo + hi) >> 1
        if v < a[mid]:
            hi = mid
        else:
            lo = mid + 1
    return lo


@njit(cache=True, inline="always")
def _bisect_left(a, v, lo, hi):
    while lo < hi:
        mid = (lo + hi) >> 1
        if a[mid] < v:
            lo = mid + 1
        else:
            hi = mid
    return lo


@njit(cache=True, inline="always")
def _locate(cos_, sin_, yoff, bin_start, s, x, y):
    """Project onto slice ``s``; returns (x', global bin index)."""
    c = cos_[s]
    sn = sin_[s]
    xp = x * c + y * sn
    yp = -x * sn + y * c + yoff[s]
    nb = bin_start[s + 1] - bin_start[s]
    b = int(math.floor(yp))
    # in-map points satisfy 0 <= y' < nb up to rounding
    if b < 0:
        b = 0
    elif b >= nb:
        b = nb - 1
    return xp, bin_start[s] + b


@njit(cache=True, inline="always")
def cddt_cast(cells, cos_, sin_, yoff, bin_start, offsets, points, theta_disc, x, y, theta,
              max_range):
    h, w = cells.shape
    if not (0.0 <= x < w and 0.0 <= y < h):
        return max_range
    if cells[int(math.floor(y)), int(math.floor(x))]:
        return 0.0
    n_slices = theta_disc // 2
    a = angle_index(theta, theta_disc)
    s = a if a < n_slices else a - n_slices
    xp, g = _locate(cos_, sin_, yoff, bin_start, s, x, y)
    lo = offsets[g]
    hi = offsets[g + 1]
    if a < n_slices:
        i = _bisect_right(points, xp, lo, hi)
        if i == hi:
            return max_range
        d = points[i] - xp
    else:
        j = _bisect_left(points, xp, lo, hi) - 1
        if j < lo:
            return max_range
        d = xp - points[j]
    return d if d < max_range else max_range


@njit(cache=True, inline="always")
def cddt_cast_pair(cells, cos_, sin_, yoff, bin_start, offsets, points, theta_disc, x, y, theta,
                   max_range):
    """Ranges along ``theta`` and ``theta + pi`` from one binary search."""
    h, w = cells.shape
    if not (0.0 <= x < w and 0.0 <= y < h):
        return max_range, max_range
    if cells[int(math.floor(y)), int(math.floor(x))]:
        return 0.0, 0.0
    n_slices = theta_disc // 2
    a = angle_index(theta, theta_disc)
    s = a if a < n_slices else a - n_slices
    xp, g = _locate(cos_, sin_, yoff, bin_start, s, x, y)
    lo = offsets[g]
    hi = offsets[g + 1]
    i = _bisect_right(points, xp, lo, hi)
    succ = points[i] - xp if i < hi else max_range
    j = i - 1
    # equal keys belong to neither side
    while j >= lo and points[j] >= xp:
        j -= 1
    pred = xp - points[j] if j >= lo else max_range
    if succ > max_range:
        succ = max_range
    if pred > max_range:
        pred = max_range
    if a < n_slices:
        return succ, pred
    return pred, succ


@hot_kernel
def cddt_batch(cells, cos_, sin_, yoff, bin_start, offsets, points, theta_disc, xs, ys, ts,
               max_range, out):
    for i in range(xs.shape[0]):
        out[i] = cddt_cast(cells, cos_, sin_, yoff, bin_start, offsets, points, theta_disc,
                           xs[i], ys[i], ts[i], max_range)


@hot_kernel
def cddt_pair_batch(cells, cos_, sin_, yoff, bin_start, offsets, points, theta_disc, xs, ys, ts,
                    max_range, fwd, bwd):
    for i in range(xs.shape[0]):
        fwd[i], bwd[i] = cddt_cast_pair(cells, cos_, sin_, yoff, bin_start, offsets, points,
                                        theta_disc, xs[i], ys[i], ts[i], max_range)


@hot_kernel
def cddt_scan(cells, cos_, sin_, yoff, bin_start, offsets, points, theta_disc, xs, ys, ts,
              beam_offsets, partner, max_range, out):
    """Ranges for every pose and beam; ``out`` is ``(n_poses, n_beams)``.

    ``partner[b] > b`` names the beam roughly opposite ``b``. When the two
    beams also round to opposite discrete headings, one paired search
    answers both; otherwise each beam is cast on its own.
    """
    half = theta_disc // 2
    n_beams = beam_offsets.shape[0]
    for p in range(xs.shape[0]):
        for b in range(n_beams):
            j = partner[b]
            if 0 <= j < b:
                continue  # filled in by its partner
            tb = ts[p] + beam_offsets[b]
            if j > b:
                tj = ts[p] + beam_offsets[j]
                ab = angle_index(tb, theta_disc)
                aj = angle_index(tj, theta_disc)
                if aj == (ab + half) % theta_disc:
                    out[p, b], out[p, j] = cddt_cast_pair(
                        cells, cos_, sin_, yoff, bin_start, offsets, points, theta_disc,
                        xs[p], ys[p], tb, max_range)
                    continue
                out[p, j] = cddt_cast(cells, cos_, sin_, yoff, bin_start, offsets, points,
                                      theta_disc, xs[p], ys[p], tj, max_range)
            out[p, b] = cddt_cast(cells, cos_, sin_, yoff, bin_start, offsets, points,
                                  theta_disc, xs[p], ys[p], tb, max_range)


@hot_kernel
def _repeat_cddt(cells, cos_, sin_, yoff, bin_start, offsets, points, theta_disc, x, y, t,
                 max_range, reps):
    acc = 0.0
    for _ in range(reps):
        acc += cddt_cast(cells, cos_, sin_, yoff, bin_start, offsets, points, theta_disc,
                         x + 0.0 * acc, y, t, max_range)
    return acc


@hot_kernel
def _prune_marks(cells, cos_, sin_, yoff, bin_start, offsets, points, marks):
    """Mark every zero point that answers some cell-centre query, either direction."""
    h, w = cells.shape
    for s in range(cos_.shape[0]):
        for cy in range(h):
            for cx in range(w):
                if cells[cy, cx]:
                    continue
                xp, g = _locate(cos_, sin_, yoff, bin_start, s, cx + 0.5, cy + 0.5)
                lo = offsets[g]
                hi = offsets[g + 1]
                i = _bisect_right(points, xp, lo, hi)
                if i < hi:
                    marks[i] = True
                j = _bisect_left(points, xp, lo, hi) - 1
                if j >= lo:
                    marks[j] = True


# ---------------------------------------------------------------- estimator


class CDDT(RangeMethod):
    """Compressed directional distance transform range method.

    Parameters
    ----------
    theta_disc : int
        Number of discrete headings over the full circle (even). Half as many
        slices are stored.
    max_range : float, optional
        Defaults to the map diagonal.
    dynamic : bool
        Keep bins as sorted Python lists so :meth:`set_occupancy` can edit
        them. Batch queries re-pack the lists into flat arrays on demand.
    """

    name = "cddt"

    def __init__(self, theta_disc=DEFAULT_THETA_DISC, max_range=None, dynamic=False):
        self.theta_disc = theta_disc
        self.max_range = max_range
        self.dynamic = dynamic

    # -- construction

    def _build(self, grid):
        check_theta_disc(self.theta_disc)
        w, h = grid.width, grid.height
        n_slices = self.theta_disc // 2
        theta, c, s, yoff, bin_count = slice_parameters(w, h, n_slices)
        self._cos, self._sin, self._yoff = c, s, yoff
        self._bin_count = bin_count
        self._bin_start = np.concatenate([[0], np.cumsum(bin_count)]).astype(np.int64)
        self.slices_ = [SliceProjection(float(theta[i]), float(c[i]), float(s[i]),
                                        float(yoff[i]), int(bin_count[i]))
                        for i in range(n_slices)]
        self.cells_ = grid.cells.copy()
        edges = edge_map(grid).cells.astype(bool)
        self.membership_ = edges
        ey, ex = np.nonzero(edges)
        sl, b, xp = zero_points(ex, ey, c, s, yoff, bin_count)
        g = self._bin_start[sl] + b
        order = np.lexsort((xp, g))
        self._points = np.ascontiguousarray(xp[order])
        counts = np.bincount(g, minlength=int(self._bin_start[-1]))
        self._offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        self.pruned_ = False
        self._bins = self._unpack() if self.dynamic else None
        self._stale = False

    def _unpack(self):
        pts = self._points.tolist()
        off = self._offsets.tolist()
        return [pts[off[i]:off[i + 1]] for i in range(len(off) - 1)]

    def _repack(self):
        counts = np.fromiter((len(b) for b in self._bins), dtype=np.int64, count=len(self._bins))
        self._offsets = np.concatenate([[0], np.cumsum(counts)]).astype(np.int64)
        flat = [v for b in self._bins for v in b]
        self._points = np.asarray(flat, dtype=np.float32)
        self._stale = False

    def _arrays(self):
        if self._stale:
            self._repack()
        return (self.cells_, self._cos, self._sin, self._yoff, self._bin_start, self._offsets,
                self._points, self.theta_disc)

    # -- queries

    def _cast(self, x, y, theta):
        if self._bins is not None:
            return self._cast_lists(x, y, theta)
        return cddt_cast(*self._arrays(), x, y, theta, self.max_range_)

    def _batch(self, xs, ys, ts, out):
        cddt_batch(*self._arrays(), xs, ys, ts, self.max_range_, out)

    def _repeat(self, x, y, theta, reps):
        return _repeat_cddt(*self._arrays(), x, y, theta, self.max_range_, reps)

    def _cast_lists(self, x, y, theta):
        """Query straight from the editable bins (same arithmetic as the kernel)."""
        h, w = self.cells_.shape
        if not (0.0 <= x < w and 0.0 <= y < h):
            return self.max_range_
        if self.cells_[int(math.floor(y)), int(math.floor(x))]:
            return 0.0
        n_slices = self.theta_disc // 2
        a = int(math.floor(theta * self.theta_disc / TWO_PI + 0.5)) % self.theta_disc
        s = a if a < n_slices else a - n_slices
        xp, g = _locate(self._cos, self._sin, self._yoff, self._bin_start, s, x, y)
        bin_ = self._bins[g]
        if a < n_slices:
            i = bisect.bisect_right(bin_, xp)
            d = bin_[i] - xp if i < len(bin_) else self.max_range_
        else:
            j = bisect.bisect_left(bin_, xp) - 1
            d = xp - bin_[j] if j >= 0 else self.max_range_
        return min(d, self.max_range_)

    def cast_pair(self, x: float, y: float, theta: float) -> tuple[float, float]:
        """Ranges along ``theta`` and ``theta + pi`` for the price of one search."""
        check_is_fitted(self, "grid_")
        f, b = cddt_cast_pair(*self._arrays(), float(x), float(y), normalize_angle(theta),
                              self.max_range_)
        return float(f), float(b)

    def predict_pairs(self, X) -> tuple[np.ndarray, np.ndarray]:
        check_is_fitted(self, "grid_")
        X = check_queries(X)
        fwd = np.empty(X.shape[0])
        bwd = np.empty(X.shape[0])
        cddt_pair_batch(*self._arrays(), np.ascontiguousarray(X[:, 0]),
                        np.ascontiguousarray(X[:, 1]), np.ascontiguousarray(X[:, 2]),
                        self.max_range_, fwd, bwd)
        return fwd, bwd

    def predict_scan(self, poses, beam_offsets, partner=None) -> np.ndarray:
        """Expected ranges ``(n_poses, n_beams)``, pairing opposite beams when possible.

        ``partner`` maps each beam to the index of its opposite beam, or -1.
        Without it every beam is cast separately.
        """
        check_is_fitted(self, "grid_")
        P = check_queries(poses)
        offs = np.ascontiguousarray(beam_offsets, dtype=np.float64).ravel()
        if partner is None:
            partner = np.full(offs.shape[0], -1, dtype=np.int64)
        partner = np.ascontiguousarray(partner, dtype=np.int64)
        if partner.shape != offs.shape:
            raise ValueError("partner must have one entry per beam")
        out = np.empty((P.shape[0], offs.shape[0]))
        cddt_scan(*self._arrays(), np.ascontiguousarray(P[:, 0]), np.ascontiguousarray(P[:, 1]),
                  np.ascontiguousarray(P[:, 2]), offs, partner, self.max_range_, out)
        return out

    # -- structure access

    @property
    def n_slices(self) -> int:
        return self.theta_disc // 2

    @property
    def grid(self) -> OccupancyGrid:
        """Snapshot of the current (possibly edited) occupancy."""
        check_is_fitted(self, "grid_")
        return OccupancyGrid(self.cells_, self.grid_.resolution)

    def bin(self, slice_index: int, bin_index: int) -> np.ndarray:
        """Sorted zero points of one bin (float32)."""
        check_is_fitted(self, "grid_")
        if not 0 <= bin_index < self._bin_count[slice_index]:
            raise IndexError(f"bin {bin_index} out of range for slice {slice_index}")
        g = self._bin_start[slice_index] + bin_index
        if self._bins is not None:
            return np.asarray(self._bins[g], dtype=np.float32)
        return self._points[self._offsets[g]:self._offsets[g + 1]].copy()

    def bins(self, slice_index: int) -> list[np.ndarray]:
        return [self.bin(slice_index, b) for b in range(int(self._bin_count[slice_index]))]

    def n_zero_points(self) -> int:
        check_is_fitted(self, "grid_")
        if self._bins is not None:
            return sum(len(b) for b in self._bins)
        return int(self._points.shape[0])

    def max_bin_length(self) -> int:
        self._arrays()
        return int(np.diff(self._offsets).max(initial=0))

    def memory_bytes(self) -> int:
        """``4 * zero points + ceil(w*h / 8) + 32 * slices``.

        Zero points are float32, the occupancy grid is counted as a bitmap and
        each slice carries its projection terms plus bin bookkeeping.
        """
        check_is_fitted(self, "grid_")
        w, h = self.grid_.width, self.grid_.height
        return 4 * self.n_zero_points() + -(-(w * h) // 8) + SLICE_OVERHEAD_BYTES * self.n_slices

    # -- pruning

    def prune(self) -> "CDDT":
        """Copy keeping only zero points reachable from some cell-centre query.

        Each free cell centre is cast in every slice in both directions and
        the successor and predecessor it lands on are kept. All discrete-state
        answers, including paired ones, are unchanged. The result is static.
        """
        check_is_fitted(self, "grid_")
        args = self._arrays()
        marks = np.zeros(self._points.shape[0], dtype=np.bool_)
        _prune_marks(*args[:7], marks)
        out = PCDDT(theta_disc=self.theta_disc, max_range=self.max_range)
        out.__dict__.update({k: v for k, v in self.__dict__.items() if k.endswith("_") or
                             k.startswith("_")})
        out.cells_ = self.cells_.copy()
        out.membership_ = self.membership_.copy()
        cs = np.concatenate([[0], np.cumsum(marks)]).astype(np.int64)
        out._offsets = cs[self._offsets]
        out._points = np.ascontiguousarray(self._points[marks])
        out._bins = None
        out._stale = False
        out.pruned_ = True
        return out

    # -- incremental updates

    def set_occupancy(self, x: int, y: int, occupied: bool) -> None:
        """Toggle one cell and patch the bins to match.

        Inserting a cell adds its zero points; removing one deletes its points
        and inserts any occupied neighbour that is uncovered by the removal.
        Setting a cell to its current state does nothing.
        """
        check_is_fitted(self, "grid_")
        if self.pruned_:
            raise UpdateDisabledError("pruned structures cannot be edited")
        if self._bins is None:
            raise UpdateDisabledError("structure was built static; refit with dynamic=True")
        h, w = self.cells_.shape
        if not (0 <= x < w and 0 <= y < h):
            raise IndexError(f"cell ({x}, {y}) outside {w}x{h} grid")
        occupied = bool(occupied)
        if bool(self.cells_[y, x]) == occupied:
            return
        self.cells_[y, x] = occupied
        if occupied:
            self._insert_pixel(x, y)
            return
        if self.membership_[y, x]:
            self._remove_pixel(x, y)
        for ny in range(max(0, y - 1), min(h, y + 2)):
            for nx in range(max(0, x - 1), min(w, x + 2)):
                if self.cells_[ny, nx] and not self.membership_[ny, nx]:
                    self._insert_pixel(nx, ny)

    def _pixel_entries(self, x, y):
        sl, b, xp = zero_points([x], [y], self._cos, self._sin, self._yoff, self._bin_count)
        return zip((self._bin_start[sl] + b).tolist(), xp.tolist())

    def _insert_pixel(self, x, y):
        for g, v in self._pixel_entries(x, y):
            bisect.insort(self._bins[g], v)
        self.membership_[y, x] = True
        self._stale = True

    def _remove_pixel(self, x, y):
        for g, v in self._pixel_entries(x, y):
            bin_ = self._bins[g]
            i = bisect.bisect_left(bin_, v)
            if i == len(bin_) or bin_[i] != v:
                raise AssertionError(f"zero point {v} of ({x}, {y}) missing from bin {g}")
            del bin_[i]
        self.membership_[y, x] = False
        self._stale = True

    # -- test support

    def reconstruct_row(self, slice_index: int, bin_index: int, length: int,
                        direction: str = "forward") -> np.ndarray:
        return reconstruct_row(self.bin(slice_index, bin_index), length, direction,
                               self.max_range_)

    # -- serialization

    def to_bytes(self) -> bytes:
        """Little-endian dump: header, grid and membership bitmaps, slices, bins, points."""
        check_is_fitted(self, "grid_")
        self._arrays()
        w, h = self.grid_.width, self.grid_.height
        header = _HEADER.pack(MAGIC, FORMAT_VERSION, w, h, self.theta_disc, int(self.pruned_),
                              self.max_range_, self.grid_.resolution)
        parts = [
            header,
            np.packbits(self.cells_.astype(bool)).tobytes(),
            np.packbits(self.membership_).tobytes(),
            self._cos.astype("<f8").tobytes(),
            self._sin.astype("<f8").tobytes(),
            self._yoff.astype("<f8").tobytes(),
            self._bin_count.astype("<u4").tobytes(),
            self._offsets.astype("<u4").tobytes(),
            self._points.astype("<f4").tobytes(),
        ]
        return b"".join(parts)

    @classmethod
    def from_bytes(cls, data: bytes, dynamic: bool = False) -> "CDDT":
        if len(data) < _HEADER.size:
            raise ValueError(f"truncated CDDT header: {len(data)} of {_HEADER.size} bytes")
        magic, version, w, h, theta_disc, pruned, max_range, resolution = _HEADER.unpack_from(data)
        if magic != MAGIC:
            raise ValueError(f"bad magic {magic!r}")
        if version != FORMAT_VERSION:
            raise ValueError(f"unsupported format version {version}")
        pos = _HEADER.size
        n_cells = w * h
        n_bitmap = -(-n_cells // 8)

        def take(n_bytes, dtype):
            nonlocal pos
            if pos + n_bytes > len(data):
                raise ValueError(f"truncated CDDT payload at byte {pos}")
            dt = np.dtype(dtype)
            arr = np.frombuffer(data, dtype=dt, count=n_bytes // dt.itemsize, offset=pos)
            pos += n_bytes
            return arr

        cells = np.unpackbits(take(n_bitmap, np.uint8))[:n_cells].reshape(h, w)
        member = np.unpackbits(take(n_bitmap, np.uint8))[:n_cells].reshape(h, w).astype(bool)
        n_slices = theta_disc // 2
        c = take(8 * n_slices, "<f8").astype(np.float64)
        s = take(8 * n_slices, "<f8").astype(np.float64)
        yoff = take(8 * n_slices, "<f8").astype(np.float64)
        bin_count = take(4 * n_slices, "<u4").astype(np.int64)
        n_bins = int(bin_count.sum())
        offsets = take(4 * (n_bins + 1), "<u4").astype(np.int64)
        points = take(4 * int(offsets[-1]), "<f4").astype(np.float32)
        if pos != len(data):
            raise ValueError(f"{len(data) - pos} trailing bytes after CDDT payload")

        if pruned:
            out = PCDDT(theta_disc=theta_disc, max_range=max_range)
        else:
            out = cls(theta_disc=theta_disc, max_range=max_range, dynamic=dynamic)
        grid = OccupancyGrid(cells, resolution)
        out.grid_ = grid
        out.max_range_ = float(max_range)
        out.init_time_ = 0.0
        out.cells_ = grid.cells.copy()
        out.membership_ = member.copy()
        out._cos, out._sin, out._yoff, out._bin_count = c, s, yoff, bin_count
        out._bin_start = np.concatenate([[0], np.cumsum(bin_count)]).astype(np.int64)
        theta = np.arange(n_slices) * (math.pi / n_slices)
        out.slices_ = [SliceProjection(float(theta[i]), float(c[i]), float(s[i]), float(yoff[i]),
                                       int(bin_count[i])) for i in range(n_slices)]
        out._offsets = offsets
        out._points = points
        out.pruned_ = bool(pruned)
        out._stale = False
        out._bins = out._unpack() if (dynamic and not pruned) else None
        return out


class PCDDT(CDDT):
    """CDDT pruned of zero points no discrete-state query can reach. Static."""

    name = "pcddt"

    def __init__(self, theta_disc=DEFAULT_THETA_DISC, max_range=None):
        self.theta_disc = theta_disc
        self.max_range = max_range

    @property
    def dynamic(self):
        return False

    def _build(self, grid):
        CDDT._build(self, grid)
        pruned = self.prune()
        self.__dict__.update({k: v for k, v in pruned.__dict__.items()
                              if k.endswith("_") or k.startswith("_")})


def reconstruct_row(points, length: int, direction: str = "forward", max_range: float = math.inf):
    """Decompress one DDT row: the cast distance at ``x' = t + 0.5`` for ``t < length``."""
    points = np.asarray(points, dtype=np.float64)
    xq = np.arange(length) + 0.5
    if direction == "forward":
        i = np.searchsorted(points, xq, side="right")
        d = np.where(i < points.size, points[np.minimum(i, points.size - 1)] - xq, max_range) \
            if points.size else np.full(length, max_range)
    elif direction == "backward":
        j = np.searchsorted(points, xq, side="left") - 1
        d = np.where(j >= 0, xq - points[np.maximum(j, 0)], max_range) \
            if points.size else np.full(length, max_range)
    else:
        raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")
    return np.minimum(d, max_range)
