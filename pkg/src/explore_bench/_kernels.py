"""Compiled inner loops shared by sensing, motion and exploration.

All grids are 2-D C-contiguous arrays indexed ``[row, col]``; neighbor order
is fixed (up, down, left, right) so results are deterministic.
"""

import heapq

import numpy as np
from numba import njit

_DR = np.array([-1, 1, 0, 0], dtype=np.int64)
_DC = np.array([0, 0, -1, 1], dtype=np.int64)


@njit(cache=True)
def bfs_distance(passable, sr, sc):
    """Unit-cost 4-connected BFS distances from (sr, sc); -1 where unreachable."""
    h, w = passable.shape
    dist = np.full((h, w), -1, dtype=np.int32)
    if not passable[sr, sc]:
        return dist
    queue = np.empty(h * w, dtype=np.int64)
    head = 0
    tail = 0
    dist[sr, sc] = 0
    queue[tail] = sr * w + sc
    tail += 1
    while head < tail:
        cur = queue[head]
        head += 1
        r = cur // w
        c = cur - r * w
        d = dist[r, c] + 1
        for k in range(4):
            nr = r + _DR[k]
            nc = c + _DC[k]
            if 0 <= nr < h and 0 <= nc < w and passable[nr, nc] and dist[nr, nc] < 0:
                dist[nr, nc] = d
                queue[tail] = nr * w + nc
                tail += 1
    return dist


@njit(cache=True)
def astar(passable, sr, sc, gr, gc):
    """A* over 4-connected passable cells with a Manhattan heuristic.

    Open-list entries are ``(f, h, row, col)`` so ties break lexicographically.
    Returns an ``(n, 2)`` array of cells from start to goal, or an empty array.
    """
    h, w = passable.shape
    g = np.full((h, w), -1, dtype=np.int32)
    closed = np.zeros((h, w), dtype=np.uint8)
    parent = np.full((h, w), -1, dtype=np.int64)
    g[sr, sc] = 0
    h0 = abs(sr - gr) + abs(sc - gc)
    heap = [(h0, h0, sr, sc)]
    found = False
    while len(heap) > 0:
        f, hh, r, c = heapq.heappop(heap)
        if closed[r, c]:
            continue
        closed[r, c] = 1
        if r == gr and c == gc:
            found = True
            break
        ng = g[r, c] + 1
        for k in range(4):
            nr = r + _DR[k]
            nc = c + _DC[k]
            if 0 <= nr < h and 0 <= nc < w and passable[nr, nc] and not closed[nr, nc]:
                if g[nr, nc] < 0 or ng < g[nr, nc]:
                    g[nr, nc] = ng
                    parent[nr, nc] = r * w + c
                    nh = abs(nr - gr) + abs(nc - gc)
                    heapq.heappush(heap, (ng + nh, nh, nr, nc))
    if not found:
        return np.empty((0, 2), dtype=np.int64)
    n = g[gr, gc] + 1
    out = np.empty((n, 2), dtype=np.int64)
    cur = gr * w + gc
    for i in range(n - 1, -1, -1):
        out[i, 0] = cur // w
        out[i, 1] = cur % w
        cur = parent[out[i, 0], out[i, 1]]
    return out


@njit(cache=True)
def cast_rays(truth, r0, c0, offsets, lengths, free_val, occ_val):
    """Walk precomputed ray offsets from (r0, c0) over ``truth``.

    Returns a uint8 mask: 1 for cells seen free, 2 for the first occupied cell
    hit on a ray. Rays stop at the first occupied cell or the grid edge.
    """
    h, w = truth.shape
    seen = np.zeros((h, w), dtype=np.uint8)
    seen[r0, c0] = 1
    for i in range(offsets.shape[0]):
        for j in range(lengths[i]):
            r = r0 + offsets[i, j, 0]
            c = c0 + offsets[i, j, 1]
            if r < 0 or r >= h or c < 0 or c >= w:
                break
            v = truth[r, c]
            if v == occ_val:
                seen[r, c] = 2
                break
            if v == free_val:
                seen[r, c] = 1
            else:
                break
    return seen


@njit(cache=True)
def walk_segment(cells, r0, c0, r1, c1, free_val, occ_val):
    """Bresenham walk from (r0, c0) to (r1, c1) over a known map.

    Returns ``(status, r, c, fr, fc)``: status 0 if every cell is free,
    1 if an unknown cell is met first (at ``(r, c)``), 2 if an occupied or
    out-of-bounds cell is met first. ``(fr, fc)`` is the last free cell.
    """
    h, w = cells.shape
    dr = abs(r1 - r0)
    dc = abs(c1 - c0)
    sr = 1 if r1 > r0 else -1
    sc = 1 if c1 > c0 else -1
    err = dc - dr
    r = r0
    c = c0
    fr = r0
    fc = c0
    while True:
        if r < 0 or r >= h or c < 0 or c >= w:
            return 2, r, c, fr, fc
        v = cells[r, c]
        if v == occ_val:
            return 2, r, c, fr, fc
        if v != free_val:
            return 1, r, c, fr, fc
        fr = r
        fc = c
        if r == r1 and c == c1:
            return 0, r, c, fr, fc
        e2 = 2 * err
        if e2 >= -dr:
            err -= dr
            c += sc
        if e2 <= dc:
            err += dc
            r += sr
