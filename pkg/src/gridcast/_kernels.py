"""Compiled inner loops shared by the range methods.

Every kernel takes plain arrays so it can be called from other kernels and
from the timing harness without Python in the loop. ``cells`` is always a
``(height, width)`` uint8 array indexed ``[y, x]``.
"""

import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi
INF = np.inf

# Driver loops never allocate. Compiling them without the reference-counting
# runtime keeps an incref/decref pair per array argument out of every
# iteration, which otherwise dominates sub-100 ns casts with many arrays.
hot_kernel = njit(cache=True, _nrt=False)


@njit(cache=True)
def edt_1d_squared(f):
    """Squared 1-D distance transform of sampled function ``f`` (lower envelope of parabolas)."""
    n = f.shape[0]
    d = np.empty(n)
    v = np.zeros(n, dtype=np.int64)
    z = np.empty(n + 1)
    k = 0
    v[0] = 0
    z[0] = -INF
    z[1] = INF
    for q in range(1, n):
        s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        while s <= z[k]:
            k -= 1
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = INF
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        d[q] = (q - v[k]) * (q - v[k]) + f[v[k]]
    return d


@njit(cache=True, inline="always")
def normalize_angle(theta):
    if 0.0 <= theta < TWO_PI:
        return theta
    t = theta % TWO_PI
    if t >= TWO_PI:
        t = 0.0
    return t


@njit(cache=True, inline="always")
def round_half_up(v):
    return math.floor(v + 0.5)


@njit(cache=True, inline="always")
def angle_index(theta, theta_disc):
    """Nearest of the ``theta_disc`` discrete headings, ties rounding up."""
    i = int(round_half_up(normalize_angle(theta) * theta_disc / TWO_PI))
    # normalized headings round to at most theta_disc, which wraps to 0
    return i - theta_disc if i >= theta_disc else i


# ------------------------------------------------------------------ oracle


@njit(cache=True, inline="always")
def oracle_cast(cells, x, y, theta, max_range):
    """Exact traversal of every cell the ray enters (Amanatides & Woo).

    Returns the distance to the entry point into the first occupied cell.
    A ray through an exact corner steps diagonally: cells it only touches at
    a point are not entered.
    """
    h, w = cells.shape
    if not (0.0 <= x < w and 0.0 <= y < h):
        return max_range
    cx = int(math.floor(x))
    cy = int(math.floor(y))
    if cells[cy, cx]:
        return 0.0
    dx = math.cos(theta)
    dy = math.sin(theta)
    if dx > 0.0:
        sx = 1
        t_x = (cx + 1 - x) / dx
        dt_x = 1.0 / dx
    elif dx < 0.0:
        sx = -1
        t_x = (cx - x) / dx
        dt_x = -1.0 / dx
    else:
        sx = 0
        t_x = INF
        dt_x = INF
    if dy > 0.0:
        sy = 1
        t_y = (cy + 1 - y) / dy
        dt_y = 1.0 / dy
    elif dy < 0.0:
        sy = -1
        t_y = (cy - y) / dy
        dt_y = -1.0 / dy
    else:
        sy = 0
        t_y = INF
        dt_y = INF
    while True:
        if t_x < t_y:
            t = t_x
            cx += sx
            t_x += dt_x
        elif t_y < t_x:
            t = t_y
            cy += sy
            t_y += dt_y
        else:
            t = t_x
            cx += sx
            cy += sy
            t_x += dt_x
            t_y += dt_y
        if t >= max_range:
            return max_range
        if cx < 0 or cx >= w or cy < 0 or cy >= h:
            return max_range
        if cells[cy, cx]:
            return t


@hot_kernel
def oracle_batch(cells, xs, ys, ts, max_range, out):
    for i in range(xs.shape[0]):
        out[i] = oracle_cast(cells, xs[i], ys[i], ts[i], max_range)


# --------------------------------------------------------------- bresenham


@njit(cache=True, inline="always")
def bresenham_cast(cells, x, y, theta, max_range):
    """Bresenham-style line walk with a sub-pixel start.

    One cell per step along the major axis, picked by the ray's minor
    coordinate at the column (or row) centre. Returns the distance from the
    query point to the centre of the first occupied cell.
    """
    h, w = cells.shape
    if not (0.0 <= x < w and 0.0 <= y < h):
        return max_range
    cx = int(math.floor(x))
    cy = int(math.floor(y))
    if cells[cy, cx]:
        return 0.0
    dx = math.cos(theta)
    dy = math.sin(theta)
    if abs(dx) >= abs(dy):
        sx = 1 if dx > 0.0 else -1
        slope = dy / abs(dx)
        # minor coordinate at the centre of the next column
        err = y + (cx + 0.5 + sx - x) * sx * slope
        px = cx
        while True:
            px += sx
            if px < 0 or px >= w:
                return max_range
            py = int(math.floor(err))
            if py < 0 or py >= h:
                return max_range
            if cells[py, px]:
                d = math.hypot(px + 0.5 - x, py + 0.5 - y)
                return d if d < max_range else max_range
            if abs(px + 0.5 - x) > max_range:
                return max_range
            err += slope
    else:
        sy = 1 if dy > 0.0 else -1
        slope = dx / abs(dy)
        err = x + (cy + 0.5 + sy - y) * sy * slope
        py = cy
        while True:
            py += sy
            if py < 0 or py >= h:
                return max_range
            px = int(math.floor(err))
            if px < 0 or px >= w:
                return max_range
            if cells[py, px]:
                d = math.hypot(px + 0.5 - x, py + 0.5 - y)
                return d if d < max_range else max_range
            if abs(py + 0.5 - y) > max_range:
                return max_range
            err += slope


@hot_kernel
def bresenham_batch(cells, xs, ys, ts, max_range, out):
    for i in range(xs.shape[0]):
        out[i] = bresenham_cast(cells, xs[i], ys[i], ts[i], max_range)


# ------------------------------------------------------------ ray marching


@njit(cache=True, inline="always")
def ray_march_cast(cells, dist, x, y, theta, max_range):
    """March along the ray by the clearance of the current cell, minus one pixel.

    The clearance is sampled at the containing cell while the true position
    may be up to half a diagonal away, hence the one pixel margin; the 0.5 px
    floor bounds the iteration count by twice the path length.
    """
    h, w = cells.shape
    dx = math.cos(theta)
    dy = math.sin(theta)
    t = 0.0
    while True:
        px = x + t * dx
        py = y + t * dy
        if not (0.0 <= px < w and 0.0 <= py < h):
            return max_range
        cx = int(math.floor(px))
        cy = int(math.floor(py))
        if cells[cy, cx]:
            return t if t < max_range else max_range
        step = dist[cy, cx] - 1.0
        if step < 0.5:
            step = 0.5
        t += step
        if t >= max_range:
            return max_range


@hot_kernel
def ray_march_batch(cells, dist, xs, ys, ts, max_range, out):
    for i in range(xs.shape[0]):
        out[i] = ray_march_cast(cells, dist, xs[i], ys[i], ts[i], max_range)


# ------------------------------------------------------------ lookup table


@hot_kernel
def lut_fill(cells, theta_disc, max_range, max_code, table):
    """Fill ``table[y, x, i]`` with rounded oracle ranges from cell centres."""
    h, w = cells.shape
    d_theta = TWO_PI / theta_disc
    for i in range(theta_disc):
        theta = i * d_theta
        for cy in range(h):
            for cx in range(w):
                r = oracle_cast(cells, cx + 0.5, cy + 0.5, theta, max_range)
                if r >= max_range:
                    table[cy, cx, i] = max_code
                else:
                    v = round_half_up(r)
                    table[cy, cx, i] = v if v < max_code else max_code


@njit(cache=True, inline="always")
def lut_cast(table, theta_disc, max_code, x, y, theta, max_range):
    h, w, _ = table.shape
    if not (0.0 <= x < w and 0.0 <= y < h):
        return max_range
    i = angle_index(theta, theta_disc)
    v = table[int(math.floor(y)), int(math.floor(x)), i]
    if v >= max_code:
        return max_range
    return float(v)


@hot_kernel
def lut_batch(table, theta_disc, max_code, xs, ys, ts, max_range, out):
    for i in range(xs.shape[0]):
        out[i] = lut_cast(table, theta_disc, max_code, xs[i], ys[i], ts[i], max_range)
