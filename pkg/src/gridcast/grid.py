"""Occupancy grids, PGM I/O, edge extraction and the exact Euclidean distance transform."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from ._kernels import edt_1d_squared

DEFAULT_RESOLUTION = 0.05
OCCUPIED_THRESHOLD = 127

_RES_COMMENT = re.compile(rb"resolution[:=\s]+([0-9eE.+-]+)")


class PGMError(ValueError):
    """Raised for malformed or truncated PGM data."""

    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


@dataclass(frozen=True, eq=False)
class OccupancyGrid:
    """Binary occupancy grid.

    ``cells`` is a ``(height, width)`` uint8 array indexed ``cells[y, x]``;
    1 marks an obstacle. Cell ``(x, y)`` covers the unit square
    ``[x, x + 1) x [y, y + 1)`` of the continuous pixel plane, x grows to the
    right and y downwards. Headings are measured from +x towards +y.
    """

    cells: np.ndarray
    resolution: float = DEFAULT_RESOLUTION

    def __post_init__(self):
        cells = np.asarray(self.cells)
        if cells.ndim != 2:
            raise ValueError(f"cells must be 2-D, got shape {cells.shape}")
        if cells.shape[0] < 1 or cells.shape[1] < 1:
            raise ValueError("grid must be at least 1x1")
        if cells.dtype != np.uint8 or not cells.flags.c_contiguous:
            if not np.isin(cells, (0, 1)).all():
                raise ValueError("cells must be 0 or 1")
            cells = np.ascontiguousarray(cells, dtype=np.uint8)
        elif cells.max(initial=0) > 1:
            raise ValueError("cells must be 0 or 1")
        else:
            cells = cells.copy()
        if not (self.resolution > 0 and math.isfinite(self.resolution)):
            raise ValueError(f"resolution must be positive, got {self.resolution}")
        cells.flags.writeable = False
        object.__setattr__(self, "cells", cells)

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    @property
    def diagonal(self) -> float:
        """Map diagonal length in pixels, the farthest an in-map ray can travel."""
        return math.hypot(self.width, self.height)

    @property
    def n_occupied(self) -> int:
        return int(self.cells.sum(dtype=np.int64))

    def is_occupied(self, x: float, y: float) -> bool:
        return is_occupied(self, x, y)

    def with_cell(self, x: int, y: int, occupied: bool) -> "OccupancyGrid":
        cells = self.cells.copy()
        cells[y, x] = 1 if occupied else 0
        return OccupancyGrid(cells, self.resolution)

    def __eq__(self, other):
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return self.resolution == other.resolution and np.array_equal(self.cells, other.cells)

    def __repr__(self):
        return (
            f"OccupancyGrid(width={self.width}, height={self.height}, "
            f"resolution={self.resolution}, occupied={self.n_occupied})"
        )


@dataclass(frozen=True, eq=False)
class DistanceField:
    """Per-cell Euclidean distance (pixels) to the nearest occupied cell."""

    values: np.ndarray

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]


def is_occupied(grid: OccupancyGrid, x: float, y: float) -> bool:
    """True iff the cell containing ``(x, y)`` is inside the grid and occupied."""
    if not (0.0 <= x < grid.width and 0.0 <= y < grid.height):
        return False
    return bool(grid.cells[int(math.floor(y)), int(math.floor(x))])


def edge_map(grid: OccupancyGrid) -> OccupancyGrid:
    """Occupied cells minus their 8-connected morphological erosion.

    Out-of-bounds neighbours count as free, so occupied border cells are kept.
    """
    occ = grid.cells.astype(bool)
    padded = np.pad(occ, 1, constant_values=False)
    h, w = occ.shape
    interior = occ.copy()
    for dy in (-1, 0, 1):
        for dx in (-1, 0, 1):
            if dx or dy:
                interior &= padded[1 + dy : 1 + dy + h, 1 + dx : 1 + dx + w]
    return OccupancyGrid((occ & ~interior).astype(np.uint8), grid.resolution)


def distance_transform(grid: OccupancyGrid) -> DistanceField:
    """Exact Euclidean distance transform (two separable lower-envelope passes).

    Distances are measured between integer cell coordinates. A grid without
    obstacles gets the map diagonal everywhere.
    """
    occ = grid.cells.astype(bool)
    if not occ.any():
        return DistanceField(np.full(occ.shape, grid.diagonal, dtype=np.float32))
    big = float((grid.width + grid.height) ** 2 + 1)
    f = np.where(occ, 0.0, big)
    for x in range(f.shape[1]):
        f[:, x] = edt_1d_squared(f[:, x].copy())
    for y in range(f.shape[0]):
        f[y, :] = edt_1d_squared(f[y, :].copy())
    return DistanceField(np.sqrt(f).astype(np.float32))


# --------------------------------------------------------------------- PGM I/O


def _tokens(data: bytes, pos: int, count: int):
    """Read ``count`` whitespace-separated header tokens, skipping comments."""
    out = []
    n = len(data)
    while len(out) < count:
        while pos < n and (data[pos : pos + 1].isspace() or data[pos] == ord("#")):
            if data[pos] == ord("#"):
                while pos < n and data[pos] not in (10, 13):
                    pos += 1
            else:
                pos += 1
        if pos >= n:
            raise PGMError("truncated header", pos)
        start = pos
        while pos < n and not data[pos : pos + 1].isspace() and data[pos] != ord("#"):
            pos += 1
        tok = data[start:pos]
        if not tok.isdigit():
            raise PGMError(f"expected an integer, got {tok[:16]!r}", start)
        out.append((int(tok), start))
    return out, pos


def parse_pgm(data: bytes) -> tuple[np.ndarray, int, float | None]:
    """Decode a P2/P5 image into ``(pixels, maxval, resolution_or_None)``."""
    if len(data) < 2 or data[:1] != b"P" or data[1:2] not in (b"2", b"5"):
        raise PGMError("not a P2/P5 PGM (bad magic)", 0)
    binary = data[1:2] == b"5"
    ((w, w_off), (h, h_off), (maxval, m_off)), header_end = _tokens(data, 2, 3)
    if w == 0:
        raise PGMError("zero width", w_off)
    if h == 0:
        raise PGMError("zero height", h_off)
    if not 0 < maxval < 65536:
        raise PGMError(f"maxval {maxval} outside 1..65535", m_off)
    m = _RES_COMMENT.search(data[:header_end])
    resolution = float(m.group(1)) if m else None

    if binary:
        if header_end >= len(data) or not data[header_end : header_end + 1].isspace():
            raise PGMError("missing whitespace after maxval", header_end)
        start = header_end + 1
        depth = 1 if maxval < 256 else 2
        need = w * h * depth
        if len(data) - start < need:
            raise PGMError(f"truncated payload: need {need} bytes, have {len(data) - start}", len(data))
        dtype = np.uint8 if depth == 1 else np.dtype(">u2")
        pixels = np.frombuffer(data, dtype=dtype, count=w * h, offset=start).reshape(h, w)
    else:
        body = data[header_end:]
        body = re.sub(rb"#[^\r\n]*", b"", body)
        vals = body.split()
        if len(vals) < w * h:
            raise PGMError(f"truncated payload: need {w * h} samples, have {len(vals)}", len(data))
        try:
            pixels = np.array([int(v) for v in vals[: w * h]], dtype=np.int64).reshape(h, w)
        except ValueError as exc:
            raise PGMError(f"non-integer sample ({exc})", header_end) from None
    if pixels.max(initial=0) > maxval:
        raise PGMError("sample exceeds maxval", header_end)
    return np.asarray(pixels), maxval, resolution


def load_pgm(data: Union[bytes, str, Path], resolution: float | None = None) -> OccupancyGrid:
    """Load a PGM map. Dark pixels (<= 127 on an 8-bit scale) are obstacles.

    ``data`` is either raw bytes or a path. An explicit ``resolution`` wins
    over a ``# resolution <m/px>`` header comment, which wins over the default.
    """
    if isinstance(data, (str, Path)):
        data = Path(data).read_bytes()
    pixels, maxval, header_res = parse_pgm(bytes(data))
    # the 8-bit threshold 127/255, rescaled for other bit depths
    occupied = pixels.astype(np.int64) * 255 <= OCCUPIED_THRESHOLD * maxval
    res = resolution if resolution is not None else (header_res or DEFAULT_RESOLUTION)
    return OccupancyGrid(occupied.astype(np.uint8), res)


def dump_pgm(grid: OccupancyGrid) -> bytes:
    """Encode as binary P5: obstacles black (0), free space white (255)."""
    header = f"P5\n# resolution {grid.resolution!r}\n{grid.width} {grid.height}\n255\n".encode()
    return header + np.where(grid.cells == 1, 0, 255).astype(np.uint8).tobytes()


def save_pgm(grid: OccupancyGrid, path: Union[str, Path]) -> None:
    Path(path).write_bytes(dump_pgm(grid))
