"""Simulated 360-degree LIDAR via Bresenham raycasting, local mapping, map merging."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels
from .errors import ConsistencyError, DimensionMismatch, InvalidPose, OutOfBounds
from .grid import FREE, OCCUPIED, UNKNOWN, OccupancyGrid, Pose, world_to_cell


@dataclass(frozen=True)
class SensorSpec:
    range: float = 7.0
    rays: int = 720

    def __post_init__(self):
        if not self.range > 0:
            raise ValueError("sensor range must be positive")
        if self.rays < 8:
            raise ValueError("sensor needs at least 8 rays")


def bresenham(r0: int, c0: int, r1: int, c1: int) -> list[tuple[int, int]]:
    """Cells on the Bresenham line from (r0, c0) to (r1, c1), both ends included."""
    dc, dr = abs(c1 - c0), -abs(r1 - r0)
    sc = 1 if c1 > c0 else -1
    sr = 1 if r1 > r0 else -1
    err = dc + dr
    out = []
    r, c = r0, c0
    while True:
        out.append((r, c))
        if r == r1 and c == c1:
            return out
        e2 = 2 * err
        if e2 >= dr:
            err += dr
            c += sc
        if e2 <= dc:
            err += dc
            r += sr


@lru_cache(maxsize=32)
def ray_table(range_cells: float, rays: int) -> tuple[np.ndarray, np.ndarray]:
    """Relative cell offsets along each ray, clipped to the range disk.

    Bresenham lines are translation invariant, so the table is computed once
    per sensor and shifted to the robot cell at scan time. The origin cell is
    not part of any ray.
    """
    lines = []
    r2 = range_cells * range_cells
    for i in range(rays):
        a = 2.0 * np.pi * i / rays
        end_r = int(round(range_cells * np.sin(a)))
        end_c = int(round(range_cells * np.cos(a)))
        cells = bresenham(0, 0, end_r, end_c)[1:]
        lines.append([(r, c) for r, c in cells if r * r + c * c <= r2 + 1e-9])
    longest = max(len(line) for line in lines)
    offsets = np.zeros((rays, max(longest, 1), 2), dtype=np.int64)
    lengths = np.zeros(rays, dtype=np.int64)
    for i, line in enumerate(lines):
        lengths[i] = len(line)
        if line:
            offsets[i, :len(line)] = line
    offsets.setflags(write=False)
    lengths.setflags(write=False)
    return offsets, lengths


@dataclass(frozen=True)
class ScanResult:
    """Cells seen by one scan, as flat (row-major) indices into the grid.

    ``free`` and ``occupied`` are sorted and disjoint.
    """

    shape: tuple[int, int]
    free: np.ndarray
    occupied: np.ndarray

    @property
    def observed_free(self) -> set[tuple[int, int]]:
        return {tuple(map(int, divmod(i, self.shape[1]))) for i in self.free}

    @property
    def observed_occupied(self) -> set[tuple[int, int]]:
        return {tuple(map(int, divmod(i, self.shape[1]))) for i in self.occupied}

    @property
    def cells(self) -> np.ndarray:
        return np.union1d(self.free, self.occupied)


def scan_from_cell(cell: tuple[int, int], spec: SensorSpec, truth: OccupancyGrid) -> ScanResult:
    row, col = cell
    if not truth.in_bounds(row, col):
        raise InvalidPose(f"scan origin {cell} out of bounds")
    if truth.cells[row, col] != FREE:
        raise InvalidPose(f"scan origin {cell} is not a free cell")
    offsets, lengths = ray_table(spec.range / truth.resolution, spec.rays)
    seen = _kernels.cast_rays(truth.cells, row, col, offsets, lengths, FREE, OCCUPIED)
    flat = seen.ravel()
    return ScanResult(truth.shape, np.flatnonzero(flat == 1), np.flatnonzero(flat == 2))


def simulate_scan(pose: Pose, spec: SensorSpec, truth: OccupancyGrid) -> ScanResult:
    """Cast ``spec.rays`` equally spaced Bresenham rays from the pose cell.

    Free cells are collected until a ray meets its first occupied cell (which
    is reported as occupied) or leaves the range disk.

    Raises:
        InvalidPose: the pose is outside the grid or on an occupied cell.
    """
    try:
        cell = world_to_cell(pose, truth)
    except OutOfBounds as exc:
        raise InvalidPose(str(exc)) from None
    return scan_from_cell(cell, spec, truth)


def update_local_map(local: OccupancyGrid, scan: ScanResult) -> tuple[OccupancyGrid, np.ndarray]:
    """Write scan observations into ``local`` in place.

    Returns the same grid and the sorted flat indices of cells that were
    Unknown before this update.
    """
    if local.shape != tuple(scan.shape):
        raise DimensionMismatch(f"local map {local.shape} vs scan {tuple(scan.shape)}")
    flat = local.cells.reshape(-1)
    new_free = scan.free[flat[scan.free] == UNKNOWN]
    new_occ = scan.occupied[flat[scan.occupied] == UNKNOWN]
    flat[new_free] = FREE
    flat[new_occ] = OCCUPIED
    return local, np.union1d(new_free, new_occ)


def _shifted(cells: np.ndarray, offset: tuple[int, int]) -> np.ndarray:
    dr, dc = offset
    if dr == 0 and dc == 0:
        return cells
    h, w = cells.shape
    out = np.full_like(cells, UNKNOWN)
    src_r = slice(max(0, -dr), min(h, h - dr))
    src_c = slice(max(0, -dc), min(w, w - dc))
    dst_r = slice(max(0, dr), min(h, h + dr))
    dst_c = slice(max(0, dc), min(w, w + dc))
    out[dst_r, dst_c] = cells[src_r, src_c]
    return out


def merge_maps(locals_: list[OccupancyGrid], offsets=None) -> OccupancyGrid:
    """Cell-wise join of partial maps; Unknown is the identity element.

    ``offsets`` optionally gives an integer ``(row, col)`` translation per map
    into the merged frame (identity when omitted).

    Raises:
        DimensionMismatch: maps differ in shape or resolution.
        ConsistencyError: two maps disagree on a known cell.
    """
    if not locals_:
        raise ValueError("nothing to merge")
    first = locals_[0]
    for m in locals_[1:]:
        if m.shape != first.shape or m.resolution != first.resolution:
            raise DimensionMismatch(f"cannot merge {m!r} into {first!r}")
    if offsets is None:
        offsets = [(0, 0)] * len(locals_)
    merged = np.full(first.shape, UNKNOWN, dtype=np.int8)
    for m, off in zip(locals_, offsets):
        cells = _shifted(m.cells, (int(off[0]), int(off[1])))
        known = cells != UNKNOWN
        clash = known & (merged != UNKNOWN) & (merged != cells)
        if clash.any():
            r, c = np.argwhere(clash)[0]
            raise ConsistencyError(f"maps disagree at cell ({r}, {c})")
        merged[known] = cells[known]
    return OccupancyGrid(merged, first.resolution, first.origin)
