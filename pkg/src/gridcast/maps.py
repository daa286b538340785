"""Synthetic maps for tests, benchmarks and the localization demo."""

from __future__ import annotations

import numpy as np

from .grid import OccupancyGrid

# Small worked example: one obstacle per row, (x, y) cell coordinates.
GRID4_OBSTACLES = ((3, 0), (1, 1), (2, 2), (3, 3))


def grid4() -> OccupancyGrid:
    cells = np.zeros((4, 4), dtype=np.uint8)
    for x, y in GRID4_OBSTACLES:
        cells[y, x] = 1
    return OccupancyGrid(cells)


def random_blocks(width: int, height: int, seed: int, n_blocks: int | None = None,
                  max_side: int = 8, border: bool = True) -> OccupancyGrid:
    """Border walls plus randomly placed axis-aligned rectangles."""
    rng = np.random.default_rng(seed)
    cells = np.zeros((height, width), dtype=np.uint8)
    if n_blocks is None:
        n_blocks = max(1, width * height // 256)
    for _ in range(n_blocks):
        bw, bh = rng.integers(1, max_side + 1, size=2)
        x0 = rng.integers(0, max(1, width - bw + 1))
        y0 = rng.integers(0, max(1, height - bh + 1))
        cells[y0:y0 + bh, x0:x0 + bw] = 1
    if border:
        cells[0, :] = cells[-1, :] = 1
        cells[:, 0] = cells[:, -1] = 1
    return OccupancyGrid(cells)


def random_noise(width: int, height: int, seed: int, density: float = 0.1) -> OccupancyGrid:
    """Independent Bernoulli cells."""
    rng = np.random.default_rng(seed)
    return OccupancyGrid((rng.random((height, width)) < density).astype(np.uint8))


def structured_map(size: int = 256, seed: int = 0, wall: int = 1) -> OccupancyGrid:
    """Indoor-like map: thick outer wall, 3x3 rooms joined by doorways, solid boxes.

    Walls are ``wall`` pixels thick.
    """
    rng = np.random.default_rng(seed)
    cells = np.zeros((size, size), dtype=np.uint8)
    cells[:wall, :] = cells[-wall:, :] = 1
    cells[:, :wall] = cells[:, -wall:] = 1
    third = size // 3
    door = max(4, size // 16)
    for k in (1, 2):
        pos = k * third
        cells[pos:pos + wall, :] = 1
        cells[:, pos:pos + wall] = 1
    for k in (1, 2):
        pos = k * third
        for seg in range(3):
            lo = seg * third + wall + 1
            hi = lo + third - 2 * wall - door - 2
            c = int(rng.integers(lo, max(lo + 1, hi)))
            cells[pos:pos + wall, c:c + door] = 0
            c = int(rng.integers(lo, max(lo + 1, hi)))
            cells[c:c + door, pos:pos + wall] = 0
    for _ in range(max(1, size // 16)):
        s = int(rng.integers(2, max(3, size // 24)))
        x0, y0 = rng.integers(wall + 2, size - s - wall - 2, size=2)
        cells[y0:y0 + s, x0:x0 + s] = 1
    return OccupancyGrid(cells)


def loop_map(size: int = 128) -> OccupancyGrid:
    """A ring corridor around a central block, with asymmetric features to break symmetry."""
    cells = np.zeros((size, size), dtype=np.uint8)
    cells[0, :] = cells[-1, :] = 1
    cells[:, 0] = cells[:, -1] = 1
    m = size // 4
    cells[m:size - m, m:size - m] = 1
    f = size // 16
    # notches, pillars and alcoves, each unique around the loop
    cells[1:f, size // 3:size // 3 + 2] = 1
    cells[size - f:size - 1, 2 * size // 3:2 * size // 3 + 3] = 1
    cells[size // 2:size // 2 + 4, 1:f + 2] = 1
    cells[m:m + f // 2 + 1, size // 2 - 6:size // 2 + 6] = 0
    cells[size // 5:size // 5 + 3, size - f - 2:size - 1] = 1
    # pillars sit in the outer corners, clear of the corridor centreline
    cells[4:7, 4:7] = 1
    cells[size - 10:size - 6, size - 7:size - 5] = 1
    cells[size - m + 3:size - m + 7, m // 2 + 10:m // 2 + 13] = 1
    return OccupancyGrid(cells)
