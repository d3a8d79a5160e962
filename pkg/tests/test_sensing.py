import numpy as np
import pytest

from explore_bench import FREE, OCCUPIED, UNKNOWN, OccupancyGrid, Pose, SensorSpec
from explore_bench.errors import ConsistencyError, DimensionMismatch, InvalidPose
from explore_bench.grid import cell_to_world
from explore_bench.sensing import (
    bresenham, merge_maps, ray_table, scan_from_cell, simulate_scan, update_local_map,
)
from oracles import bearing_lines, line_of_sight_ok, nearest_cell_line, random_room_map


def _box(n=20):
    cells = np.full((n, n), OCCUPIED, dtype=np.int8)
    cells[1:-1, 1:-1] = FREE
    return OccupancyGrid(cells)


def test_sensor_spec_validation():
    with pytest.raises(ValueError):
        SensorSpec(range=0)
    with pytest.raises(ValueError):
        SensorSpec(rays=4)


@pytest.mark.parametrize("end", [(0, 7), (7, 0), (3, 11), (-5, 2), (-9, -9), (4, -13)])
def test_bresenham_matches_nearest_cell_line(end):
    assert bresenham(0, 0, *end) == nearest_cell_line(*end)


def test_ray_table_is_clipped_to_disk():
    offsets, lengths = ray_table(30.0, 360)
    for i in range(len(lengths)):
        o = offsets[i, :lengths[i]]
        assert np.all(o[:, 0] ** 2 + o[:, 1] ** 2 <= 900)


def test_open_room_fully_seen():
    g = _box(20)
    s = scan_from_cell((10, 10), SensorSpec(range=7.0, rays=720), g)
    # no occlusion and range beyond the diagonal: every cell is observed
    assert len(s.observed_free) == 18 * 18
    # diagonal rays reach the corners as well, so the whole ring is seen
    assert len(s.observed_occupied) == 20 * 20 - 18 * 18


def test_scan_pose_cell_always_free():
    g = _box(10)
    s = scan_from_cell((4, 4), SensorSpec(range=0.1, rays=8), g)
    assert (4, 4) in s.observed_free


def test_wall_blocks_view():
    g = _box(30)
    g.cells[1:-1, 15] = OCCUPIED
    s = scan_from_cell((10, 5), SensorSpec(), g)
    assert all(c < 16 for _, c in s.observed_free | s.observed_occupied)
    assert (10, 15) in s.observed_occupied


def test_simulate_scan_invalid_pose():
    g = _box(10)
    with pytest.raises(InvalidPose):
        simulate_scan(Pose(0.05, 0.05), SensorSpec(), g)     # wall cell
    with pytest.raises(InvalidPose):
        simulate_scan(Pose(5.0, 5.0), SensorSpec(), g)       # outside


def test_simulate_scan_uses_pose_cell():
    g = _box(12)
    a = simulate_scan(cell_to_world((5, 6), g), SensorSpec(), g)
    b = scan_from_cell((5, 6), SensorSpec(), g)
    np.testing.assert_array_equal(a.free, b.free)


def test_line_of_sight_on_random_maps():
    rng = np.random.default_rng(11)
    spec = SensorSpec()
    lines = bearing_lines(spec.range / 0.1, spec.rays)
    for _ in range(10):
        truth = random_room_map(rng, 32, 32, 4)
        free = np.argwhere(truth == FREE)
        origin = tuple(int(v) for v in free[rng.integers(len(free))])
        s = scan_from_cell(origin, spec, OccupancyGrid(truth))
        ok, extra = line_of_sight_ok(truth, origin, s.observed_free | s.observed_occupied, lines)
        assert ok, extra
        assert all(truth[c] == FREE for c in s.observed_free)
        assert all(truth[c] == OCCUPIED for c in s.observed_occupied)


def test_update_local_map_reports_new_cells():
    g = _box(12)
    local = g.blank_like()
    s = scan_from_cell((5, 5), SensorSpec(range=0.3, rays=64), g)
    _, new = update_local_map(local, s)
    assert len(new) == len(s.cells)
    _, again = update_local_map(local, s)
    assert len(again) == 0
    with pytest.raises(DimensionMismatch):
        update_local_map(OccupancyGrid.filled(3, 3), s)


def test_merge_join_and_identity():
    a = OccupancyGrid(np.array([[0, -1], [-1, 100]], dtype=np.int8))
    b = OccupancyGrid(np.array([[-1, 0], [-1, 100]], dtype=np.int8))
    m = merge_maps([a, b])
    np.testing.assert_array_equal(m.cells, [[0, 0], [-1, 100]])
    assert merge_maps([a, a.blank_like()]) == a
    assert merge_maps([a, b]) == merge_maps([b, a])


def test_merge_errors():
    a = OccupancyGrid(np.array([[0]], dtype=np.int8))
    with pytest.raises(ConsistencyError):
        merge_maps([a, OccupancyGrid(np.array([[100]], dtype=np.int8))])
    with pytest.raises(DimensionMismatch):
        merge_maps([a, OccupancyGrid.filled(2, 2)])


def test_merge_with_offsets():
    a = OccupancyGrid(np.array([[0, -1, -1]], dtype=np.int8))
    b = OccupancyGrid(np.array([[100, -1, -1]], dtype=np.int8))
    m = merge_maps([a, b], offsets=[(0, 0), (0, 2)])
    np.testing.assert_array_equal(m.cells, [[FREE, UNKNOWN, OCCUPIED]])


def test_merge_randomized_properties():
    rng = np.random.default_rng(5)
    truth = rng.choice(np.array([0, 100], dtype=np.int8), size=(16, 16))
    parts = []
    for _ in range(4):
        p = np.full_like(truth, UNKNOWN)
        mask = rng.random(truth.shape) < 0.4
        p[mask] = truth[mask]
        parts.append(OccupancyGrid(p))
    m = merge_maps(parts)
    known = np.any([p.cells != UNKNOWN for p in parts], axis=0)
    np.testing.assert_array_equal(m.cells != UNKNOWN, known)
    np.testing.assert_array_equal(m.cells[known], truth[known])
    assert merge_maps(parts[::-1]) == m
