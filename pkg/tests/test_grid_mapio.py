import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from explore_bench import FREE, OCCUPIED, UNKNOWN, OccupancyGrid, Pose, load_map, save_map
from explore_bench.errors import OutOfBounds, ParseError
from explore_bench.grid import Scenario, area_of, cell_to_world, observable_mask, world_to_cell
from explore_bench.mapio import load_scenario, save_scenario


def test_grid_rejects_non_ternary_values():
    with pytest.raises(ValueError):
        OccupancyGrid(np.array([[0, 50]], dtype=np.int8))


def test_grid_rejects_bad_resolution():
    with pytest.raises(ValueError):
        OccupancyGrid(np.zeros((2, 2), dtype=np.int8), resolution=0)


def test_world_cell_round_trip():
    g = OccupancyGrid.filled(10, 20, origin=(-1.0, 2.0))
    for cell in [(0, 0), (9, 19), (3, 7)]:
        assert world_to_cell(cell_to_world(cell, g), g) == cell
    # cell (0, 0) spans [origin, origin + res)
    assert world_to_cell(Pose(-1.0, 2.0), g) == (0, 0)
    assert world_to_cell(Pose(-0.9, 2.1), g) == (1, 1)


def test_world_to_cell_out_of_bounds():
    g = OccupancyGrid.filled(10, 10)
    with pytest.raises(OutOfBounds):
        world_to_cell(Pose(1.0, 0.5), g)
    with pytest.raises(OutOfBounds):
        world_to_cell(Pose(-0.01, 0.5), g)


def test_area_of():
    g = OccupancyGrid(np.array([[0, 0], [100, -1]], dtype=np.int8), resolution=0.5)
    assert area_of(g, 0) == pytest.approx(0.5)
    assert area_of(g, 100) == pytest.approx(0.25)


def test_observable_mask_counts_free_and_touching_walls():
    cells = np.full((5, 5), OCCUPIED, dtype=np.int8)
    cells[2, 2] = FREE
    m = observable_mask(cells)
    # the free cell plus its four wall neighbours; diagonal walls are never hit
    assert m.sum() == 5
    assert not m[1, 1]


def test_scenario_validate_reports_problems():
    cells = np.full((6, 6), OCCUPIED, dtype=np.int8)
    cells[1:5, 1:5] = FREE
    g = OccupancyGrid(cells)
    assert Scenario(g, [cell_to_world((2, 2), g)]).validate() == []
    cells2 = cells.copy()
    cells2[1:5, 3] = OCCUPIED
    problems = Scenario(OccupancyGrid(cells2), [Pose(0.05, 0.05)]).validate()
    assert any("components" in p for p in problems)
    assert any("spawn 0" in p for p in problems)


# -- PGM / YAML ------------------------------------------------------------

def _write_oracle_pair(tmp_path):
    # hand-written 2x2 P5 file: top row (254, 0), bottom row (205, 254)
    (tmp_path / "m.pgm").write_bytes(b"P5\n# hand written\n2 2\n255\n" + bytes([254, 0, 205, 254]))
    (tmp_path / "m.yaml").write_text(
        "image: m.pgm\nresolution: 0.05\norigin: [1.0, -2.0, 0.0]\nnegate: 0\n"
        "occupied_thresh: 0.65\nfree_thresh: 0.196\n")


def test_pgm_hand_written_oracle(tmp_path):
    _write_oracle_pair(tmp_path)
    g = load_map(tmp_path / "m.yaml")
    # image rows are top-down, grid rows bottom-up
    expected = np.array([[UNKNOWN, FREE], [FREE, OCCUPIED]], dtype=np.int8)
    np.testing.assert_array_equal(g.cells, expected)
    assert g.resolution == 0.05
    assert g.origin == (1.0, -2.0)


def test_pgm_ascii_variant(tmp_path):
    (tmp_path / "a.pgm").write_bytes(b"P2\n2 1\n255\n254 0\n")
    (tmp_path / "a.yaml").write_text("image: a.pgm\nresolution: 0.1\n")
    np.testing.assert_array_equal(load_map(tmp_path / "a.pgm").cells, [[FREE, OCCUPIED]])


def test_pgm_bad_magic(tmp_path):
    (tmp_path / "b.pgm").write_bytes(b"P7\n2 2\n255\n" + bytes(4))
    (tmp_path / "b.yaml").write_text("image: b.pgm\nresolution: 0.1\n")
    with pytest.raises(ParseError):
        load_map(tmp_path / "b.yaml")


def test_pgm_truncated_raster(tmp_path):
    (tmp_path / "t.pgm").write_bytes(b"P5\n4 4\n255\n" + bytes(3))
    (tmp_path / "t.yaml").write_text("image: t.pgm\nresolution: 0.1\n")
    with pytest.raises(ParseError):
        load_map(tmp_path / "t.yaml")


def test_inconsistent_thresholds(tmp_path):
    _write_oracle_pair(tmp_path)
    (tmp_path / "m.yaml").write_text("image: m.pgm\nresolution: 0.1\noccupied_thresh: 0.1\n"
                                     "free_thresh: 0.5\n")
    with pytest.raises(ValueError):
        load_map(tmp_path / "m.yaml")


def test_strict_mode_rejects_intermediate_gray(tmp_path):
    (tmp_path / "g.pgm").write_bytes(b"P5\n2 1\n255\n" + bytes([254, 100]))
    (tmp_path / "g.yaml").write_text("image: g.pgm\nresolution: 0.1\n")
    load_map(tmp_path / "g.yaml")   # lenient: thresholded
    with pytest.raises(ValueError):
        load_map(tmp_path / "g.yaml", strict=True)


@settings(max_examples=60, deadline=None)
@given(arrays(np.int8, st.tuples(st.integers(1, 12), st.integers(1, 12)),
              elements=st.sampled_from([0, 100, -1])),
       st.sampled_from([0.05, 0.1, 0.25]))
def test_save_load_round_trip(tmp_path_factory, cells, res):
    d = tmp_path_factory.mktemp("rt")
    g = OccupancyGrid(cells, res, (0.5, -1.5))
    save_map(g, d / "x.pgm")
    assert load_map(d / "x.yaml", strict=True) == g


def test_scenario_sidecar_round_trip(tmp_path):
    cells = np.full((5, 5), OCCUPIED, dtype=np.int8)
    cells[1:4, 1:4] = FREE
    g = OccupancyGrid(cells)
    sc = Scenario(g, [cell_to_world((1, 1), g), cell_to_world((3, 3), g)], "box", {"k": 1})
    save_scenario(sc, tmp_path / "box.pgm")
    back = load_scenario(tmp_path / "box")
    assert back.ground_truth == g
    assert back.spawns == sc.spawns
    assert back.name == "box" and back.gen_params == {"k": 1}
