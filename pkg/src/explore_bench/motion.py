"""A* planning on the shared map and teleport-style path execution."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import _kernels
from .errors import InvalidStart, NoPath, OutOfBounds
from .grid import EIGHT_CONNECTED, FREE, OCCUPIED, UNKNOWN, OccupancyGrid, Pose, cell_to_world

V_MAX = 1.0


@dataclass(frozen=True)
class PlannedPath:
    cells: np.ndarray  # (n, 2) row/col, start first
    resolution: float
    v_max: float = V_MAX

    @property
    def length(self) -> float:
        return (len(self.cells) - 1) * self.resolution

    @property
    def est_time(self) -> float:
        return self.length / self.v_max

    @property
    def goal(self) -> tuple[int, int]:
        return int(self.cells[-1, 0]), int(self.cells[-1, 1])

    def __len__(self):
        return len(self.cells)


def passable_mask(grid: OccupancyGrid, unknown_traversable=False, inflate=False,
                  blocked=()) -> np.ndarray:
    """Boolean mask of cells a robot may enter.

    ``blocked`` lists extra ``(row, col)`` cells treated as occupied (other
    robots). ``inflate`` also forbids cells 8-adjacent to a known obstacle.
    """
    cells = grid.cells
    ok = cells == FREE
    if unknown_traversable:
        ok |= cells == UNKNOWN
    if inflate:
        ok &= ~ndimage.binary_dilation(cells == OCCUPIED, structure=EIGHT_CONNECTED)
    for r, c in blocked:
        ok[r, c] = False
    return ok


def _check_start(grid, start, passable):
    r, c = start
    if not grid.in_bounds(r, c) or grid.cells[r, c] != FREE:
        raise InvalidStart(f"start {start} is not a known free cell")
    passable[r, c] = True


def plan(start, goal, grid: OccupancyGrid, v_max: float = V_MAX, *,
         unknown_traversable=False, inflate=False, blocked=()) -> PlannedPath:
    """Shortest 4-connected path from ``start`` to ``goal`` (cells).

    Unknown cells are obstacles unless ``unknown_traversable``. Ties in the
    open list are broken on ``(f, h, row, col)``.

    Raises:
        InvalidStart: start is not a known free cell.
        OutOfBounds: goal lies outside the grid.
        NoPath: goal is unreachable.
    """
    gr, gc = map(int, goal)
    if not grid.in_bounds(gr, gc):
        raise OutOfBounds(f"goal {goal} outside grid")
    passable = passable_mask(grid, unknown_traversable, inflate, blocked)
    sr, sc = map(int, start)
    _check_start(grid, (sr, sc), passable)
    cells = _kernels.astar(passable, sr, sc, gr, gc)
    if len(cells) == 0:
        raise NoPath(f"no path from {start} to {goal}")
    return PlannedPath(cells, grid.resolution, v_max)


def distance_field(grid: OccupancyGrid, start, *, passable=None, blocked=()) -> np.ndarray:
    """BFS path length in cells from ``start`` to every cell; -1 if unreachable."""
    if passable is None:
        passable = passable_mask(grid, blocked=blocked)
    else:
        passable = passable.copy()
    sr, sc = map(int, start)
    _check_start(grid, (sr, sc), passable)
    return _kernels.bfs_distance(passable, sr, sc)


def cells_for_budget(budget: float, resolution: float, v_max: float = V_MAX) -> int:
    if not budget > 0:
        raise ValueError("budget must be positive")
    return math.floor(budget * v_max / resolution + 1e-9)


def step_along(path: PlannedPath, clock: float, budget: float, grid: OccupancyGrid | None = None,
               at: int = 0):
    """Advance along ``path`` for up to ``budget`` seconds.

    The robot jumps cell to cell; only the elapsed time is modelled, at
    ``path.v_max``. ``at`` is the index of the current cell in ``path.cells``.

    Returns:
        ``(pose, clock, done, at)`` with the new cell center pose (requires
        ``grid`` for the world frame; otherwise a cell-unit pose), the advanced
        clock, whether the final cell was reached, and the new index.
    """
    last = len(path.cells) - 1
    moved = min(cells_for_budget(budget, path.resolution, path.v_max), last - at)
    at += moved
    clock += moved * path.resolution / path.v_max
    r, c = int(path.cells[at, 0]), int(path.cells[at, 1])
    if grid is not None:
        pose = cell_to_world((r, c), grid)
    else:
        pose = Pose((c + 0.5) * path.resolution, (r + 0.5) * path.resolution)
    return pose, clock, at == last, at
