"""Numba kernels for the per-step hot loops: ray traversal, line of sight and grid search.

Grid convention everywhere: ``grid[row, col]`` with ``row = floor(y / res)`` and
``col = floor(x / res)``; cell centres sit at ``((col + 0.5) * res, (row + 0.5) * res)``.
"""

from __future__ import annotations

import heapq
import math

import numpy as np
from numba import njit

SQRT2 = math.sqrt(2.0)
# boundary crossings closer than this are treated as one corner crossing
CORNER_TOL = 1e-12

# 8-neighbourhood, orthogonal moves first.
DR = np.array([0, 0, 1, -1, 1, 1, -1, -1], dtype=np.int64)
DC = np.array([1, -1, 0, 0, 1, -1, 1, -1], dtype=np.int64)


@njit(cache=True)
def traverse(x0, y0, theta, res, height, width, max_t, rows, cols, t_in, t_out):
    """Amanatides-Woo walk from (x0, y0) along ``theta``.

    Fills the output buffers with every in-bounds cell whose entry distance is below
    ``max_t`` and returns how many were written.  Stops early at the grid boundary.
    """
    dx = math.cos(theta)
    dy = math.sin(theta)
    c = int(math.floor(x0 / res))
    r = int(math.floor(y0 / res))
    if dx > 0.0:
        step_c = 1
        tmax_x = ((c + 1) * res - x0) / dx
        tdelta_x = res / dx
    elif dx < 0.0:
        step_c = -1
        tmax_x = (c * res - x0) / dx
        tdelta_x = -res / dx
    else:
        step_c = 0
        tmax_x = np.inf
        tdelta_x = np.inf
    if dy > 0.0:
        step_r = 1
        tmax_y = ((r + 1) * res - y0) / dy
        tdelta_y = res / dy
    elif dy < 0.0:
        step_r = -1
        tmax_y = (r * res - y0) / dy
        tdelta_y = -res / dy
    else:
        step_r = 0
        tmax_y = np.inf
        tdelta_y = np.inf

    n = 0
    t_entry = 0.0
    cap = rows.shape[0]
    while t_entry < max_t and n < cap:
        if r < 0 or r >= height or c < 0 or c >= width:
            break
        if tmax_x < tmax_y:
            t_exit = tmax_x
        else:
            t_exit = tmax_y
        rows[n] = r
        cols[n] = c
        t_in[n] = t_entry
        t_out[n] = t_exit
        n += 1
        if abs(tmax_x - tmax_y) <= CORNER_TOL:
            # through a cell corner: step diagonally, the side cells are only touched at a point
            c += step_c
            r += step_r
            t_entry = tmax_x if tmax_x > tmax_y else tmax_y
            tmax_x += tdelta_x
            tmax_y += tdelta_y
        elif tmax_x < tmax_y:
            c += step_c
            t_entry = tmax_x
            tmax_x += tdelta_x
        else:
            r += step_r
            t_entry = tmax_y
            tmax_y += tdelta_y
    return n


@njit(cache=True)
def cast_rays(occ, x0, y0, angles, max_range, res):
    """First-hit range per ray; leaving the grid counts as a hit on the boundary."""
    height, width = occ.shape
    nr = angles.shape[0]
    ranges = np.empty(nr, dtype=np.float64)
    hits = np.zeros(nr, dtype=np.bool_)
    cap = int(2.0 * max_range / res) + 8
    rows = np.empty(cap, dtype=np.int64)
    cols = np.empty(cap, dtype=np.int64)
    t_in = np.empty(cap, dtype=np.float64)
    t_out = np.empty(cap, dtype=np.float64)
    for k in range(nr):
        n = traverse(x0, y0, angles[k], res, height, width, max_range, rows, cols, t_in, t_out)
        ranges[k] = max_range
        found = False
        for i in range(n):
            if occ[rows[i], cols[i]]:
                ranges[k] = t_in[i]
                hits[k] = True
                found = True
                break
        if not found and n > 0 and t_out[n - 1] < max_range:
            # walked off the grid edge
            ranges[k] = t_out[n - 1]
            hits[k] = True
    return ranges, hits


@njit(cache=True)
def ray_marks(height, width, x0, y0, angles, ranges, hits, res, free_mask, occ_mask):
    """Accumulate free/occupied evidence for a ray fan into the two masks."""
    tol = 1e-9
    cap = int(2.0 * (ranges.max() if ranges.shape[0] > 0 else 0.0) / res) + 8
    rows = np.empty(cap, dtype=np.int64)
    cols = np.empty(cap, dtype=np.int64)
    t_in = np.empty(cap, dtype=np.float64)
    t_out = np.empty(cap, dtype=np.float64)
    for k in range(angles.shape[0]):
        rng = ranges[k]
        n = traverse(x0, y0, angles[k], res, height, width, rng + 2.0 * res, rows, cols, t_in, t_out)
        for i in range(n):
            if hits[k]:
                if t_out[i] <= rng + tol:
                    free_mask[rows[i], cols[i]] = True
                else:
                    occ_mask[rows[i], cols[i]] = True
                    break
            else:
                if t_in[i] < rng:
                    free_mask[rows[i], cols[i]] = True
                else:
                    break


@njit(cache=True)
def _floordiv(a, b):
    return a // b


@njit(cache=True)
def _ceildiv(a, b):
    return -((-a) // b)


@njit(cache=True)
def supercover(r0, c0, r1, c1, out_r, out_c):
    """Closed supercover of the segment between two cell centres.

    Every cell whose closed square touches the segment is emitted, so corner
    touches count on both sides.  Integer arithmetic only.
    """
    if c1 < c0:
        r0, c0, r1, c1 = r1, c1, r0, c0
    n = 0
    dx = c1 - c0
    dy = r1 - r0
    if dx == 0:
        lo = min(r0, r1)
        hi = max(r0, r1)
        for r in range(lo, hi + 1):
            out_r[n] = r
            out_c[n] = c0
            n += 1
        return n
    den = 2 * dx
    for c in range(c0, c1 + 1):
        x_lo = max(2 * c - 1, 2 * c0)
        x_hi = min(2 * c + 1, 2 * c1)
        ya = 2 * dx * r0 + (x_lo - 2 * c0) * dy
        yb = 2 * dx * r0 + (x_hi - 2 * c0) * dy
        y_min = min(ya, yb)
        y_max = max(ya, yb)
        r_lo = _ceildiv(2 * y_min - den, 2 * den)
        r_hi = _floordiv(2 * y_max + den, 2 * den)
        for r in range(r_lo, r_hi + 1):
            out_r[n] = r
            out_c[n] = c
            n += 1
    return n


@njit(cache=True)
def los_clear(occ, r0, c0, r1, c1):
    """True when no cell of the closed supercover between the two centres is occupied."""
    cap = 2 * (abs(r1 - r0) + abs(c1 - c0)) + 4
    out_r = np.empty(cap, dtype=np.int64)
    out_c = np.empty(cap, dtype=np.int64)
    n = supercover(r0, c0, r1, c1, out_r, out_c)
    height, width = occ.shape
    for i in range(n):
        r = out_r[i]
        c = out_c[i]
        if r < 0 or r >= height or c < 0 or c >= width:
            return False
        if occ[r, c]:
            return False
    return True


@njit(cache=True)
def astar(passable, cell_cost, sr, sc, tr, tc, res, c_min):
    """A* over an 8-connected grid where entering cell x costs ``cell_cost[x] * step``.

    Diagonal moves need both orthogonal neighbours passable.  The heuristic is the
    Euclidean distance times ``c_min``, a lower bound on any step's cost.
    Returns (rows, cols, cost); empty arrays and ``inf`` cost when unreachable.
    """
    height, width = passable.shape
    size = height * width
    g = np.full(size, np.inf)
    parent = np.full(size, -1, dtype=np.int64)
    closed = np.zeros(size, dtype=np.bool_)
    start = sr * width + sc
    goal = tr * width + tc
    g[start] = 0.0
    h0 = math.sqrt((sr - tr) ** 2 + (sc - tc) ** 2) * res * c_min
    heap = [(h0, np.int64(0), np.int64(start))]
    counter = 1
    while len(heap) > 0:
        _, _, u = heapq.heappop(heap)
        if closed[u]:
            continue
        closed[u] = True
        if u == goal:
            break
        ur = u // width
        uc = u - ur * width
        for k in range(8):
            nr = ur + DR[k]
            nc = uc + DC[k]
            if nr < 0 or nr >= height or nc < 0 or nc >= width:
                continue
            if not passable[nr, nc]:
                continue
            if k >= 4:
                if not passable[nr, uc] or not passable[ur, nc]:
                    continue
                step = res * SQRT2
            else:
                step = res
            v = nr * width + nc
            if closed[v]:
                continue
            ng = g[u] + cell_cost[nr, nc] * step
            if ng < g[v]:
                g[v] = ng
                parent[v] = u
                hv = math.sqrt((nr - tr) ** 2 + (nc - tc) ** 2) * res * c_min
                heapq.heappush(heap, (ng + hv, np.int64(counter), np.int64(v)))
                counter += 1
    if not closed[goal]:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64), np.inf
    length = 0
    v = goal
    while v != -1:
        length += 1
        v = parent[v]
    rows = np.empty(length, dtype=np.int64)
    cols = np.empty(length, dtype=np.int64)
    v = goal
    i = length - 1
    while v != -1:
        rows[i] = v // width
        cols[i] = v - rows[i] * width
        i -= 1
        v = parent[v]
    return rows, cols, g[goal]


@njit(cache=True)
def dijkstra_lengths(passable, sr, sc, res):
    """Geodesic 8-connected path length (m) from one cell to every passable cell."""
    height, width = passable.shape
    size = height * width
    dist = np.full(size, np.inf)
    done = np.zeros(size, dtype=np.bool_)
    start = sr * width + sc
    dist[start] = 0.0
    heap = [(0.0, np.int64(start))]
    while len(heap) > 0:
        d, u = heapq.heappop(heap)
        if done[u]:
            continue
        done[u] = True
        ur = u // width
        uc = u - ur * width
        for k in range(8):
            nr = ur + DR[k]
            nc = uc + DC[k]
            if nr < 0 or nr >= height or nc < 0 or nc >= width:
                continue
            if not passable[nr, nc]:
                continue
            if k >= 4:
                if not passable[nr, uc] or not passable[ur, nc]:
                    continue
                step = res * SQRT2
            else:
                step = res
            v = nr * width + nc
            nd = d + step
            if nd < dist[v]:
                dist[v] = nd
                heapq.heappush(heap, (nd, np.int64(v)))
    return dist.reshape(height, width)


@njit(cache=True)
def _edt_1d(f, n, d, v, z):
    """Squared distance transform of a sampled function (lower envelope of parabolas)."""
    k = 0
    v[0] = 0
    z[0] = -np.inf
    z[1] = np.inf
    for q in range(1, n):
        s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        while s <= z[k]:
            k -= 1
            s = ((f[q] + q * q) - (f[v[k]] + v[k] * v[k])) / (2.0 * q - 2.0 * v[k])
        k += 1
        v[k] = q
        z[k] = s
        z[k + 1] = np.inf
    k = 0
    for q in range(n):
        while z[k + 1] < q:
            k += 1
        d[q] = (q - v[k]) ** 2 + f[v[k]]


@njit(cache=True)
def edt_sq(seeds):
    """Exact squared Euclidean distance (in cells) from every cell to the nearest seed.

    Cells are ``inf`` when there is no seed at all.
    """
    height, width = seeds.shape
    big = 1e20
    n = max(height, width)
    f = np.empty(n)
    d = np.empty(n)
    v = np.empty(n, dtype=np.int64)
    z = np.empty(n + 1)
    tmp = np.empty((height, width))
    for c in range(width):
        for r in range(height):
            f[r] = 0.0 if seeds[r, c] else big
        _edt_1d(f, height, d, v, z)
        for r in range(height):
            tmp[r, c] = d[r]
    out = np.empty((height, width))
    for r in range(height):
        for c in range(width):
            f[c] = tmp[r, c]
        _edt_1d(f, width, d, v, z)
        for c in range(width):
            out[r, c] = d[c] if d[c] < big / 2 else np.inf
    return out


@njit(cache=True)
def union_components(n, pairs):
    """Connected-component label per node from an edge list, labels 0..K-1 in first-seen order."""
    parent = np.arange(n)
    for e in range(pairs.shape[0]):
        a = pairs[e, 0]
        b = pairs[e, 1]
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        while parent[b] != b:
            parent[b] = parent[parent[b]]
            b = parent[b]
        if a != b:
            if a < b:
                parent[b] = a
            else:
                parent[a] = b
    labels = np.full(n, -1, dtype=np.int64)
    roots = np.full(n, -1, dtype=np.int64)
    k = 0
    for i in range(n):
        a = i
        while parent[a] != a:
            a = parent[a]
        if roots[a] < 0:
            roots[a] = k
            k += 1
        labels[i] = roots[a]
    return labels


@njit(cache=True)
def island_scores(cell_rows, cell_cols, starts, nav):
    """Per-island ``1 - d / d_max`` on navigable cells (0 elsewhere), where d is the
    Euclidean distance to the nearest member of the island and d_max its navigable maximum.

    Island i owns ``cell_rows/cols[starts[i]:starts[i + 1]]``.  A column pass gives,
    per row and member column, the squared vertical gap to the nearest member in that
    column; a row pass takes the lower envelope of the parabolas rooted at the member
    columns.  Returns an (islands, height, width) array.
    """
    height, width = nav.shape
    n_isl = starts.shape[0] - 1
    out = np.empty((n_isl, height, width))
    v = np.empty(width + 1, dtype=np.int64)
    z = np.empty(width + 2)
    for i in range(n_isl):
        a = starts[i]
        b = starts[i + 1]
        cols = np.unique(cell_cols[a:b])
        m = cols.shape[0]
        gap = np.full((height, m), np.inf)
        for e in range(a, b):
            j = np.searchsorted(cols, cell_cols[e])
            r0 = cell_rows[e]
            for r in range(height):
                dv = float((r - r0) * (r - r0))
                if dv < gap[r, j]:
                    gap[r, j] = dv
        for r in range(height):
            k = 0
            v[0] = 0
            z[0] = -np.inf
            z[1] = np.inf
            for q in range(1, m):
                pq = cols[q]
                fq = gap[r, q] + pq * pq
                while True:
                    pv = cols[v[k]]
                    s = (fq - (gap[r, v[k]] + pv * pv)) / (2.0 * (pq - pv))
                    if s <= z[k]:
                        k -= 1
                    else:
                        break
                k += 1
                v[k] = q
                z[k] = s
                z[k + 1] = np.inf
            k = 0
            for c in range(width):
                while z[k + 1] < c:
                    k += 1
                dc = c - cols[v[k]]
                out[i, r, c] = math.sqrt(dc * dc + gap[r, v[k]])
        d_max = 0.0
        for r in range(height):
            for c in range(width):
                if nav[r, c] and out[i, r, c] > d_max:
                    d_max = out[i, r, c]
        for r in range(height):
            for c in range(width):
                if not nav[r, c]:
                    out[i, r, c] = 0.0
                elif d_max > 0.0:
                    out[i, r, c] = 1.0 - out[i, r, c] / d_max
                else:
                    out[i, r, c] = 1.0
    return out
