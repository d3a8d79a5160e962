"""Frontier detection and goal-selection strategies.

Every strategy maps ``(merged map, robot poses, self id)`` to a goal pose at
the center of a reachable frontier cell. Strategies are looked up by name:
``cost``, ``sample``, ``field`` and ``goal``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import ndimage

from . import _kernels
from .errors import NoFrontier, UnknownName
from .grid import (
    EIGHT_CONNECTED, FREE, OCCUPIED, UNKNOWN, OccupancyGrid, Pose, cell_to_world, world_to_cell,
)
from .motion import passable_mask

MIN_CLUSTER = 3
DEFAULT_GAIN_RANGE = 7.0


@dataclass(frozen=True)
class Frontier:
    cells: np.ndarray          # (k, 2) member cells, row-major order
    centroid: tuple[int, int]  # member cell closest to the cluster mean
    gain: int                  # unknown cells within sensor range of the centroid

    @property
    def size(self) -> int:
        return len(self.cells)


@dataclass
class StrategyInput:
    merged_map: OccupancyGrid
    poses: list[Pose]
    self_id: int = 0

    def __post_init__(self):
        if not self.poses:
            raise ValueError("need at least one robot pose")
        if not 0 <= self.self_id < len(self.poses):
            raise ValueError(f"self id {self.self_id} out of range")

    def cell_of(self, i: int) -> tuple[int, int]:
        return world_to_cell(self.poses[i], self.merged_map)

    @property
    def self_cell(self) -> tuple[int, int]:
        return self.cell_of(self.self_id)


def frontier_mask(cells: np.ndarray) -> np.ndarray:
    """Free cells with at least one 4-neighbor Unknown (outside the grid is not Unknown)."""
    unknown = np.pad(cells == UNKNOWN, 1, constant_values=False)
    near = unknown[:-2, 1:-1] | unknown[2:, 1:-1] | unknown[1:-1, :-2] | unknown[1:-1, 2:]
    return (cells == FREE) & near


@lru_cache(maxsize=8)
def _disk(radius: int) -> np.ndarray:
    r = np.arange(-radius, radius + 1)
    return (r[:, None] ** 2 + r[None, :] ** 2) <= radius * radius


def information_gain(cells: np.ndarray, cell, radius_cells: int) -> int:
    """Unknown cells within ``radius_cells`` (Euclidean) of ``cell``."""
    r, c = cell
    h, w = cells.shape
    disk = _disk(radius_cells)
    r0, r1 = max(0, r - radius_cells), min(h, r + radius_cells + 1)
    c0, c1 = max(0, c - radius_cells), min(w, c + radius_cells + 1)
    win = cells[r0:r1, c0:c1] == UNKNOWN
    d = disk[r0 - (r - radius_cells):r1 - (r - radius_cells),
             c0 - (c - radius_cells):c1 - (c - radius_cells)]
    return int(np.count_nonzero(win & d))


def detect_frontiers(grid: OccupancyGrid, min_cluster: int = MIN_CLUSTER,
                     gain_range: float = DEFAULT_GAIN_RANGE) -> list[Frontier]:
    """Frontier clusters (8-connected) of at least ``min_cluster`` cells,
    sorted by the row-major index of their centroid."""
    mask = frontier_mask(grid.cells)
    labels, n = ndimage.label(mask, structure=EIGHT_CONNECTED)
    if n == 0:
        return []
    radius = int(round(gain_range / grid.resolution))
    out = []
    for i, sl in enumerate(ndimage.find_objects(labels), start=1):
        rr, cc = np.nonzero(labels[sl] == i)
        if len(rr) < min_cluster:
            continue
        rr = rr + sl[0].start
        cc = cc + sl[1].start
        mr, mc = rr.mean(), cc.mean()
        # nonzero() is row-major, so argmin breaks ties on the lowest index
        k = int(np.argmin((rr - mr) ** 2 + (cc - mc) ** 2))
        centroid = (int(rr[k]), int(cc[k]))
        out.append(Frontier(np.column_stack([rr, cc]), centroid,
                            information_gain(grid.cells, centroid, radius)))
    w = grid.width
    out.sort(key=lambda f: f.centroid[0] * w + f.centroid[1])
    return out


def _distance_fields(inp: StrategyInput, robots) -> dict[int, np.ndarray]:
    passable = passable_mask(inp.merged_map)
    out = {}
    for i in robots:
        r, c = inp.cell_of(i)
        p = passable.copy()
        p[r, c] = True
        out[i] = _kernels.bfs_distance(p, r, c)
    return out


def reachable_frontiers(inp: StrategyInput, dist: np.ndarray, min_cluster: int = MIN_CLUSTER,
                        gain_range: float = DEFAULT_GAIN_RANGE) -> list[Frontier]:
    """Frontiers whose centroid the robot can reach.

    Falls back to smaller clusters, then to single reachable frontier cells,
    so a few leftover cells never stall exploration.
    """
    grid = inp.merged_map
    for mc in dict.fromkeys((min_cluster, 1)):
        fr = [f for f in detect_frontiers(grid, mc, gain_range) if dist[f.centroid] >= 0]
        if fr:
            return fr
    mask = frontier_mask(grid.cells) & (dist >= 0)
    radius = int(round(gain_range / grid.resolution))
    return [Frontier(np.array([[r, c]]), (int(r), int(c)),
                     information_gain(grid.cells, (r, c), radius))
            for r, c in np.argwhere(mask)]


def _goal(f: Frontier, grid: OccupancyGrid) -> Pose:
    return cell_to_world(f.centroid, grid)


def cost_strategy(inp: StrategyInput, euclidean: bool = False) -> Pose:
    """Nearest frontier by path length (or straight-line distance)."""
    dist = _distance_fields(inp, [inp.self_id])[inp.self_id]
    fr = reachable_frontiers(inp, dist)
    if not fr:
        raise NoFrontier("no reachable frontier")
    if euclidean:
        r, c = inp.self_cell
        costs = [math.hypot(f.centroid[0] - r, f.centroid[1] - c) for f in fr]
    else:
        costs = [dist[f.centroid] for f in fr]
    return _goal(fr[int(np.argmin(costs))], inp.merged_map)


def field_scores(inp: StrategyInput, frontiers, dists, lambda_d=3.0, lambda_r=3.0, w_r=None):
    """Potential of each frontier for the requesting robot.

    ``gain * exp(-d_self / lambda_d) - sum_j w_r * exp(-d_j / lambda_r)`` with
    path distances in meters; peers that cannot reach a frontier exert no
    repulsion on it.
    """
    res = inp.merged_map.resolution
    gains = np.array([f.gain for f in frontiers], dtype=float)
    if w_r is None:
        w_r = float(np.median(gains)) if len(gains) else 0.0
    idx = tuple(np.array([f.centroid for f in frontiers]).T)
    d_self = dists[inp.self_id][idx] * res
    score = gains * np.exp(-d_self / lambda_d)
    for j, dj in dists.items():
        if j == inp.self_id:
            continue
        d = dj[idx].astype(float) * res
        score -= np.where(d >= 0, w_r * np.exp(-np.maximum(d, 0) / lambda_r), 0.0)
    return score


def field_strategy(inp: StrategyInput, lambda_d=3.0, lambda_r=3.0, w_r=None) -> Pose:
    """Frontier with the highest attraction-minus-repulsion potential."""
    dists = _distance_fields(inp, range(len(inp.poses)))
    fr = reachable_frontiers(inp, dists[inp.self_id])
    if not fr:
        raise NoFrontier("no reachable frontier")
    score = field_scores(inp, fr, dists, lambda_d, lambda_r, w_r)
    return _goal(fr[int(np.argmax(score))], inp.merged_map)


def goal_conditioned_strategy(inp: StrategyInput, global_goal: Pose) -> Pose:
    """Reachable frontier centroid closest (Euclidean) to ``global_goal``."""
    grid = inp.merged_map
    dist = _distance_fields(inp, [inp.self_id])[inp.self_id]
    fr = reachable_frontiers(inp, dist)
    if not fr:
        raise NoFrontier("no reachable frontier")
    gx = (global_goal.x - grid.origin[0]) / grid.resolution - 0.5
    gy = (global_goal.y - grid.origin[1]) / grid.resolution - 0.5
    d = [math.hypot(f.centroid[1] - gx, f.centroid[0] - gy) for f in fr]
    return _goal(fr[int(np.argmin(d))], grid)


@dataclass
class RrtState:
    """Per-robot trees for the sampling strategy (cell coordinates, float).

    The global tree persists for the whole run; the local tree is re-rooted
    at the robot whenever it detects a frontier point.
    """

    rng: np.random.Generator
    step: float = 10.0                  # cells (1 m at 0.1 m/cell)
    iterations: int = 30                # samples per decision
    max_global_nodes: int = 4000
    max_candidates: int = 200
    global_nodes: list = field(default_factory=list)
    local_nodes: list = field(default_factory=list)
    candidates: list = field(default_factory=list)

    @classmethod
    def start(cls, cell, seed=0, **kw) -> "RrtState":
        st = cls(np.random.default_rng(seed), **kw)
        st.global_nodes = [(float(cell[0]), float(cell[1]))]
        st.local_nodes = [(float(cell[0]), float(cell[1]))]
        return st


def _extend(nodes, target, step, cells):
    pts = np.asarray(nodes)
    k = int(np.argmin(((pts - target) ** 2).sum(axis=1)))
    near = pts[k]
    d = float(np.hypot(*(target - near)))
    new = target if d <= step else near + (target - near) * (step / d)
    r0, c0 = int(round(near[0])), int(round(near[1]))
    r1, c1 = int(round(new[0])), int(round(new[1]))
    status, r, c, fr, fc = _kernels.walk_segment(cells, r0, c0, r1, c1, FREE, OCCUPIED)
    return status, (float(new[0]), float(new[1])), (int(fr), int(fc))


def grow_trees(state: RrtState, robot_cell, grid: OccupancyGrid, iterations=None) -> list:
    """Run RRT iterations; returns the frontier points found in this call."""
    cells = grid.cells
    h, w = cells.shape
    found = []
    for _ in range(state.iterations if iterations is None else iterations):
        target = state.rng.uniform((0.0, 0.0), (h - 1.0, w - 1.0))
        for is_local in (False, True):
            nodes = state.local_nodes if is_local else state.global_nodes
            status, new, last_free = _extend(nodes, target, state.step, cells)
            if status == 1:
                found.append(last_free)
                if is_local:
                    state.local_nodes = [(float(robot_cell[0]), float(robot_cell[1]))]
            elif status == 0 and (is_local or len(nodes) < state.max_global_nodes):
                nodes.append(new)
    state.candidates.extend(found)
    del state.candidates[:-state.max_candidates]
    return found


def snap_candidates(points, frontiers: list[Frontier], max_dist=None):
    """Map each candidate to its nearest frontier cell.

    Returns the snapped cells (duplicates dropped, first-seen order) and the
    candidates that lie within ``max_dist`` cells of a frontier.
    """
    if not points or not frontiers:
        return [], []
    fc = np.concatenate([f.cells for f in frontiers])
    out = {}
    kept = []
    for p in points:
        d2 = ((fc - np.asarray(p)) ** 2).sum(axis=1)
        k = int(np.argmin(d2))
        if max_dist is not None and d2[k] > max_dist * max_dist:
            continue
        kept.append(p)
        out.setdefault((int(fc[k, 0]), int(fc[k, 1])), None)
    return list(out), kept


def sample_strategy(inp: StrategyInput, state: RrtState, revenue_weight: float = 1.0,
                    gain_range: float = DEFAULT_GAIN_RANGE) -> Pose:
    """RRT frontier detection; picks the candidate maximizing ``weight * gain - path cost``."""
    grid = inp.merged_map
    me = inp.self_cell
    grow_trees(state, me, grid)
    dist = _distance_fields(inp, [inp.self_id])[inp.self_id]
    fr = reachable_frontiers(inp, dist, gain_range=gain_range)
    if not fr:
        state.candidates.clear()
        raise NoFrontier("no reachable frontier")
    snapped, state.candidates = snap_candidates(state.candidates, fr, max_dist=state.step)
    snapped = [c for c in snapped if dist[c] >= 0]
    if not snapped:
        snapped = [f.centroid for f in fr]
    snapped.sort(key=lambda c: c[0] * grid.width + c[1])
    radius = int(round(gain_range / grid.resolution))
    revenue = [revenue_weight * information_gain(grid.cells, c, radius) - dist[c] for c in snapped]
    return cell_to_world(snapped[int(np.argmax(revenue))], grid)


STRATEGY_NAMES = ("cost", "sample", "field", "goal")


def check_strategy_name(name: str) -> str:
    if name not in STRATEGY_NAMES:
        raise UnknownName(f"unknown strategy {name!r}; choose from {', '.join(STRATEGY_NAMES)}")
    return name
