import numpy as np
import pytest
from scipy import ndimage

from explore_bench import (
    FREE, OCCUPIED, UNKNOWN, OccupancyGrid, Pose, cost_strategy, detect_frontiers, field_strategy,
    goal_conditioned_strategy, sample_strategy,
)
from explore_bench.errors import NoFrontier, UnknownName
from explore_bench.exploration import (
    RrtState, StrategyInput, check_strategy_name, frontier_mask, information_gain,
    reachable_frontiers, snap_candidates,
)
from explore_bench.grid import cell_to_world, world_to_cell
from explore_bench.motion import distance_field
from oracles import bfs_length, frontier_oracle, random_partial_map


def test_frontier_mask_matches_oracle():
    rng = np.random.default_rng(0)
    for _ in range(200):
        cells = random_partial_map(rng)
        got = {tuple(map(int, p)) for p in np.argwhere(frontier_mask(cells))}
        assert got == frontier_oracle(cells)


def test_clusters_partition_the_frontier():
    rng = np.random.default_rng(1)
    for _ in range(30):
        cells = random_partial_map(rng)
        fr = detect_frontiers(OccupancyGrid(cells), min_cluster=1)
        members = [tuple(map(int, c)) for f in fr for c in f.cells]
        assert len(members) == len(set(members))
        assert set(members) == frontier_oracle(cells)
        # each cluster is exactly one 8-connected component
        lab, n = ndimage.label(frontier_mask(cells), structure=np.ones((3, 3)))
        assert n == len(fr)
        for f in fr:
            assert len({lab[tuple(c)] for c in f.cells}) == 1
            assert f.centroid in {tuple(map(int, c)) for c in f.cells}


def test_min_cluster_threshold():
    cells = np.full((5, 7), FREE, dtype=np.int8)
    cells[0, 0] = UNKNOWN          # two frontier cells
    cells[4, 3:6] = UNKNOWN        # five: three above plus one at each side
    g = OccupancyGrid(cells)
    assert [f.size for f in detect_frontiers(g, min_cluster=3)] == [5]
    assert sorted(f.size for f in detect_frontiers(g, min_cluster=1)) == [2, 5]


def test_information_gain_brute_force():
    rng = np.random.default_rng(2)
    cells = random_partial_map(rng, 20, 20)
    for r, c in [(0, 0), (10, 10), (19, 5)]:
        ref = sum(1 for i in range(20) for j in range(20)
                  if cells[i, j] == UNKNOWN and (i - r) ** 2 + (j - c) ** 2 <= 25)
        assert information_gain(cells, (r, c), 5) == ref


def _room_with_unknown_east():
    cells = np.full((12, 30), OCCUPIED, dtype=np.int8)
    cells[1:-1, 1:-1] = FREE
    cells[1:-1, 20:-1] = UNKNOWN
    return OccupancyGrid(cells)


def test_no_frontier_on_known_map():
    cells = np.full((6, 6), OCCUPIED, dtype=np.int8)
    cells[1:-1, 1:-1] = FREE
    g = OccupancyGrid(cells)
    inp = StrategyInput(g, [cell_to_world((2, 2), g)])
    for strat in (cost_strategy, field_strategy):
        with pytest.raises(NoFrontier):
            strat(inp)


def test_fallback_to_single_cell_frontier():
    cells = np.full((5, 8), OCCUPIED, dtype=np.int8)
    cells[1:-1, 1:-1] = FREE
    cells[2, 7] = UNKNOWN         # one unknown boundary cell -> one frontier cell
    g = OccupancyGrid(cells)
    inp = StrategyInput(g, [cell_to_world((2, 2), g)])
    assert detect_frontiers(g) == []
    fr = reachable_frontiers(inp, distance_field(g, (2, 2)))
    assert [f.centroid for f in fr] == [(2, 6)]
    assert world_to_cell(cost_strategy(inp), g) == (2, 6)


def test_cost_picks_nearest_by_path():
    rng = np.random.default_rng(7)
    for _ in range(20):
        cells = random_partial_map(rng, 24, 24, p_occ=0.15, p_unk=0.25)
        g = OccupancyGrid(cells)
        free = np.argwhere(cells == FREE)
        me = tuple(int(v) for v in free[rng.integers(len(free))])
        inp = StrategyInput(g, [cell_to_world(me, g)])
        dist = distance_field(g, me)
        fr = reachable_frontiers(inp, dist)
        if not fr:
            with pytest.raises(NoFrontier):
                cost_strategy(inp)
            continue
        goal = world_to_cell(cost_strategy(inp), g)
        best = min(bfs_length(cells == FREE, me, f.centroid) for f in fr)
        assert bfs_length(cells == FREE, me, goal) == best


def _two_sided_corridor():
    # unknown on both ends of a known corridor; identical gains by symmetry
    cells = np.full((11, 122), OCCUPIED, dtype=np.int8)
    cells[1:-1, 1:-1] = FREE
    cells[1:-1, 1:31] = UNKNOWN
    cells[1:-1, 91:121] = UNKNOWN
    return OccupancyGrid(cells)


def test_field_spreads_robots_where_cost_does_not():
    g = _two_sided_corridor()
    poses = [cell_to_world((5, 41), g), cell_to_world((5, 51), g)]
    cost_goals = [world_to_cell(cost_strategy(StrategyInput(g, poses, i)), g)[1] for i in range(2)]
    field_goals = [world_to_cell(field_strategy(StrategyInput(g, poses, i)), g)[1]
                   for i in range(2)]
    assert cost_goals == [31, 31]
    assert field_goals == [31, 90]


def test_field_single_robot_prefers_near_gain():
    g = _two_sided_corridor()
    inp = StrategyInput(g, [cell_to_world((5, 80), g)])
    assert world_to_cell(field_strategy(inp), g)[1] == 90


def test_goal_conditioned_nearest_to_goal():
    g = _two_sided_corridor()
    inp = StrategyInput(g, [cell_to_world((5, 45), g)])
    assert world_to_cell(goal_conditioned_strategy(inp, Pose(11.0, 0.5)), g)[1] == 90
    assert world_to_cell(goal_conditioned_strategy(inp, Pose(0.2, 0.5)), g)[1] == 31


def test_sample_strategy_is_seeded_and_valid():
    g = _room_with_unknown_east()
    inp = StrategyInput(g, [cell_to_world((5, 5), g)])
    goals = []
    for _ in range(2):
        st = RrtState.start((5, 5), seed=3)
        goals.append(world_to_cell(sample_strategy(inp, st), g))
    assert goals[0] == goals[1]
    assert frontier_mask(g.cells)[goals[0]]


def test_snap_candidates_prunes_far_points():
    g = _room_with_unknown_east()
    fr = detect_frontiers(g)
    snapped, kept = snap_candidates([(5.0, 18.0), (5.0, 2.0)], fr, max_dist=5)
    assert snapped == [(5, 19)]
    assert kept == [(5.0, 18.0)]


def test_strategy_names():
    assert check_strategy_name("field") == "field"
    with pytest.raises(UnknownName):
        check_strategy_name("greedy")
