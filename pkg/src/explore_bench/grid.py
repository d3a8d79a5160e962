"""Ternary occupancy grid, poses and scenarios.

Cells are stored as a 2-D ``int8`` array indexed ``[row, col]``. Row ``r``
spans world ``y`` in ``[oy + r*res, oy + (r+1)*res)`` and column ``c`` spans
world ``x`` in ``[ox + c*res, ox + (c+1)*res)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any

import numpy as np
from scipy import ndimage

from .errors import OutOfBounds

DEFAULT_RESOLUTION = 0.1

# 4-connectivity for free space everywhere (planning, frontiers, reachability)
FOUR_CONNECTED = ndimage.generate_binary_structure(2, 1)
EIGHT_CONNECTED = ndimage.generate_binary_structure(2, 2)

# small slack so that e.g. 0.3 / 0.1 lands in cell 3, not 2
_QUANT_EPS = 1e-9


class CellState(IntEnum):
    """Cell values, following the ROS ``nav_msgs/OccupancyGrid`` convention."""

    FREE = 0
    OCCUPIED = 100
    UNKNOWN = -1


FREE = np.int8(CellState.FREE)
OCCUPIED = np.int8(CellState.OCCUPIED)
UNKNOWN = np.int8(CellState.UNKNOWN)


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    theta: float = 0.0

    def as_list(self) -> list[float]:
        return [self.x, self.y, self.theta]


@dataclass
class OccupancyGrid:
    """A ternary grid with metric resolution.

    Args:
        cells: ``(height, width)`` int8 array of :class:`CellState` values.
        resolution: meters per cell.
        origin: world ``(x, y)`` of the lower-left corner of cell ``(0, 0)``.
    """

    cells: np.ndarray
    resolution: float = DEFAULT_RESOLUTION
    origin: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self):
        self.cells = np.ascontiguousarray(self.cells, dtype=np.int8)
        if self.cells.ndim != 2:
            raise ValueError("cells must be a 2-D array")
        if not self.resolution > 0:
            raise ValueError(f"resolution must be positive, got {self.resolution}")
        bad = ~np.isin(self.cells, (FREE, OCCUPIED, UNKNOWN))
        if bad.any():
            raise ValueError(f"{int(bad.sum())} cells hold non-ternary values")
        self.origin = (float(self.origin[0]), float(self.origin[1]))
        self.resolution = float(self.resolution)

    @classmethod
    def filled(cls, height, width, state=CellState.UNKNOWN, resolution=DEFAULT_RESOLUTION,
               origin=(0.0, 0.0)) -> "OccupancyGrid":
        return cls(np.full((height, width), int(state), dtype=np.int8), resolution, origin)

    @property
    def height(self) -> int:
        return self.cells.shape[0]

    @property
    def width(self) -> int:
        return self.cells.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.cells.shape

    def in_bounds(self, row: int, col: int) -> bool:
        return 0 <= row < self.height and 0 <= col < self.width

    def same_frame(self, other: "OccupancyGrid") -> bool:
        return (self.shape == other.shape and self.resolution == other.resolution
                and self.origin == other.origin)

    def copy(self) -> "OccupancyGrid":
        return OccupancyGrid(self.cells.copy(), self.resolution, self.origin)

    def blank_like(self) -> "OccupancyGrid":
        """All-Unknown grid in the same frame."""
        return OccupancyGrid.filled(self.height, self.width, CellState.UNKNOWN,
                                    self.resolution, self.origin)

    def __eq__(self, other):
        if not isinstance(other, OccupancyGrid):
            return NotImplemented
        return self.same_frame(other) and np.array_equal(self.cells, other.cells)

    def __repr__(self):
        return (f"OccupancyGrid({self.height}x{self.width}, res={self.resolution}, "
                f"origin={self.origin})")


def world_to_cell(p: Pose, g: OccupancyGrid) -> tuple[int, int]:
    """Map a world pose to the ``(row, col)`` of the cell containing it."""
    col = math.floor((p.x - g.origin[0]) / g.resolution + _QUANT_EPS)
    row = math.floor((p.y - g.origin[1]) / g.resolution + _QUANT_EPS)
    if p.x < g.origin[0] or p.y < g.origin[1] or not g.in_bounds(row, col):
        raise OutOfBounds(f"pose ({p.x}, {p.y}) outside grid extent")
    return row, col


def cell_to_world(cell: tuple[int, int], g: OccupancyGrid, theta: float = 0.0) -> Pose:
    """Pose at the center of ``cell``."""
    row, col = cell
    if not g.in_bounds(row, col):
        raise OutOfBounds(f"cell {cell} outside {g.height}x{g.width} grid")
    return Pose(g.origin[0] + (col + 0.5) * g.resolution,
                g.origin[1] + (row + 0.5) * g.resolution, theta)


def area_of(g: OccupancyGrid, s: CellState) -> float:
    """Area in m^2 covered by cells in state ``s``."""
    return int(np.count_nonzero(g.cells == int(s))) * g.resolution ** 2


def free_components(cells: np.ndarray) -> tuple[np.ndarray, int]:
    """Label 4-connected components of free cells."""
    return ndimage.label(cells == FREE, structure=FOUR_CONNECTED)


def is_connected(cells: np.ndarray) -> bool:
    """True when all free cells form a single 4-connected component."""
    _, n = free_components(cells)
    return n == 1


def observable_mask(truth: np.ndarray) -> np.ndarray:
    """Cells a sensor can ever report: free cells plus walls 4-adjacent to them."""
    free = truth == FREE
    near_free = ndimage.binary_dilation(free, structure=FOUR_CONNECTED)
    return free | (near_free & (truth == OCCUPIED))


@dataclass
class Scenario:
    """Ground truth plus robot spawn slots and a record of how it was made."""

    ground_truth: OccupancyGrid
    spawns: list[Pose]
    name: str = "scenario"
    gen_params: dict[str, Any] = field(default_factory=dict)

    def spawn_cells(self) -> list[tuple[int, int]]:
        return [world_to_cell(p, self.ground_truth) for p in self.spawns]

    def validate(self) -> list[str]:
        """Return a list of invariant violations (empty when valid)."""
        problems = []
        cells = self.ground_truth.cells
        if np.any(cells == UNKNOWN):
            problems.append("ground truth contains Unknown cells")
        ring = np.concatenate([cells[0], cells[-1], cells[:, 0], cells[:, -1]])
        if np.any(ring != OCCUPIED):
            problems.append("boundary ring is not fully occupied")
        labels, n = free_components(cells)
        if n != 1:
            problems.append(f"free space has {n} components")
        for i, p in enumerate(self.spawns):
            try:
                r, c = world_to_cell(p, self.ground_truth)
            except OutOfBounds:
                problems.append(f"spawn {i} out of bounds")
                continue
            if cells[r, c] != FREE:
                problems.append(f"spawn {i} not on a free cell")
        return problems
