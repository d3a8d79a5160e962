"""Lock-step exploration simulation on a shared simulated clock.

One round per decision period: every robot picks a goal from the same
snapshot of the merged map, then robots plan and move in id order (peers'
current cells count as obstacles), the clock advances, and every robot scans
from its new cell. ``run`` drives rounds with a named strategy; ``Simulation``
exposes the same rounds as ``reset``/``step`` for external goal providers.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Any, Optional

import numpy as np

from .errors import (
    ExploreBenchError, InvalidStart, NoFrontier, NoPath, NotReset, StrategyError,
)
from .events import EventLog, Goal, Move, Observation, Termination
from .exploration import (
    RrtState, StrategyInput, check_strategy_name, cost_strategy, field_strategy,
    goal_conditioned_strategy, sample_strategy,
)
from .grid import (
    FREE, UNKNOWN, OccupancyGrid, Pose, Scenario, cell_to_world, observable_mask, world_to_cell,
)
from .metrics import (
    TARGET_RATIO, TOPO_RATIO, CoverageCurve, RunMetrics, overlap_ratio, sigma,
    time_at_ratio,
)
from .motion import V_MAX, plan, step_along
from .scenarios import builtin, place_spawns
from .sensing import SensorSpec, scan_from_cell

log = logging.getLogger(__name__)

SPAWN_MODES = ("far", "close", "explicit")


@dataclass
class RunConfig:
    scenario: Any = "room"          # builtin name or a Scenario
    n_robots: int = 1
    strategy: str = "cost"
    strategy_params: dict = field(default_factory=dict)
    sensor: SensorSpec = field(default_factory=SensorSpec)
    v_max: float = V_MAX
    decision_period: float = 1.0
    target_ratio: float = TARGET_RATIO
    topo_ratio: float = TOPO_RATIO
    timeout: float = 3000.0
    seed: int = 0
    spawn_mode: str = "far"
    stop_on_target: bool = True     # False keeps stepping after full coverage

    def __post_init__(self):
        check_strategy_name(self.strategy)
        if self.spawn_mode not in SPAWN_MODES:
            raise ValueError(f"spawn mode must be one of {SPAWN_MODES}")
        if self.n_robots < 1:
            raise ValueError("need at least one robot")
        if not 0 < self.topo_ratio < self.target_ratio <= 1:
            raise ValueError("need 0 < topo_ratio < target_ratio <= 1")
        if not self.decision_period > 0 or not self.v_max > 0:
            raise ValueError("decision period and v_max must be positive")

    def resolve_scenario(self) -> Scenario:
        return builtin(self.scenario) if isinstance(self.scenario, str) else self.scenario

    @property
    def scenario_name(self) -> str:
        return self.scenario if isinstance(self.scenario, str) else self.scenario.name

    def to_dict(self) -> dict:
        if isinstance(self.scenario, str):
            scen = self.scenario
        else:
            g = self.scenario.ground_truth
            scen = {"name": self.scenario.name,
                    "sha256": hashlib.sha256(g.cells.tobytes()).hexdigest(),
                    "shape": list(g.shape), "resolution": g.resolution,
                    "spawns": [p.as_list() for p in self.scenario.spawns]}
        return {
            "scenario": scen, "n_robots": self.n_robots, "strategy": self.strategy,
            "strategy_params": self.strategy_params,
            "sensor": {"range": self.sensor.range, "rays": self.sensor.rays},
            "v_max": self.v_max, "decision_period": self.decision_period,
            "target_ratio": self.target_ratio, "topo_ratio": self.topo_ratio,
            "timeout": self.timeout, "seed": self.seed, "spawn_mode": self.spawn_mode,
            "stop_on_target": self.stop_on_target,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunConfig":
        d = dict(d)
        if "sensor" in d and isinstance(d["sensor"], dict):
            d["sensor"] = SensorSpec(**d["sensor"])
        return cls(**d)

    def config_hash(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class EnvObservation:
    merged_map: OccupancyGrid
    poses: list
    coverage: float
    t: float


@dataclass
class _Robot:
    cell: tuple
    local: OccupancyGrid
    rng: np.random.Generator
    rrt: Optional[RrtState] = None
    global_goal: Optional[Pose] = None
    goal_since: float = 0.0


class RandomGoalProvider:
    """Stand-in global policy for the goal-conditioned strategy in ``run``.

    Draws a uniform point in the map extent per robot and keeps it for
    ``hold`` seconds or until the robot is within ``reach`` meters.
    """

    def __init__(self, hold: float = 20.0, reach: float = 1.0):
        self.hold = hold
        self.reach = reach

    def __call__(self, robot: _Robot, grid: OccupancyGrid, pose: Pose, t: float) -> Pose:
        g = robot.global_goal
        if g is None or t - robot.goal_since >= self.hold or \
                math.hypot(g.x - pose.x, g.y - pose.y) <= self.reach:
            w = grid.width * grid.resolution
            h = grid.height * grid.resolution
            x, y = robot.rng.uniform((0.0, 0.0), (w, h))
            robot.global_goal = Pose(grid.origin[0] + x, grid.origin[1] + y)
            robot.goal_since = t
        return robot.global_goal


class Simulation:
    """A single engine instance; owns all mutable run state."""

    def __init__(self, config: RunConfig):
        self.config = config
        self.scenario = config.resolve_scenario()
        self.truth = self.scenario.ground_truth
        self._flat_truth = self.truth.cells.reshape(-1)
        self._observable = observable_mask(self.truth.cells).reshape(-1)
        self.total_observable = int(self._observable.sum())
        self._reset_done = False

    # -- lifecycle -------------------------------------------------------

    def _spawn_cells(self):
        cfg = self.config
        if cfg.spawn_mode == "explicit":
            cells = self.scenario.spawn_cells()
            if len(cells) < cfg.n_robots:
                raise ValueError(f"scenario has {len(cells)} spawns for {cfg.n_robots} robots")
            return cells[:cfg.n_robots]
        rng = np.random.default_rng([cfg.seed, 7919])
        return place_spawns(self.truth.cells, cfg.n_robots, cfg.spawn_mode, rng,
                            self.truth.resolution)

    def reset(self) -> EnvObservation:
        cfg = self.config
        self.t = 0.0
        self.round = 0
        self.done = False
        self.termination = ""
        self.merged = self.truth.blank_like()
        self.known_observable = 0
        self.log = EventLog(width=self.truth.width)
        self.curve = CoverageCurve()
        self.trajectory = []
        self.robots = []
        for i, cell in enumerate(self._spawn_cells()):
            rb = _Robot(cell, self.truth.blank_like(), np.random.default_rng([cfg.seed, i]))
            if cfg.strategy == "sample":
                p = cfg.strategy_params
                rb.rrt = RrtState.start(cell, seed=[cfg.seed, i, 1],
                                        step=p.get("step", 1.0) / self.truth.resolution,
                                        iterations=p.get("iterations", 30))
            self.robots.append(rb)
            self.trajectory.append((0.0, i, cell[0], cell[1]))
        self._goal_provider = RandomGoalProvider(**cfg.strategy_params.get("provider", {}))
        self._reset_done = True
        self._sense()
        return self.observation()

    @property
    def coverage(self) -> float:
        return self.known_observable / self.total_observable

    def poses(self) -> list[Pose]:
        return [cell_to_world(rb.cell, self.truth) for rb in self.robots]

    def observation(self) -> EnvObservation:
        return EnvObservation(self.merged.copy(), self.poses(), self.coverage, self.t)

    # -- one round --------------------------------------------------------

    def _sense(self):
        merged_flat = self.merged.cells.reshape(-1)
        for i, rb in enumerate(self.robots):
            scan = scan_from_cell(rb.cell, self.config.sensor, self.truth)
            seen = np.union1d(scan.free, scan.occupied)
            local_flat = rb.local.cells.reshape(-1)
            new = seen[local_flat[seen] == UNKNOWN]
            if len(new):
                local_flat[new] = self._flat_truth[new]
                self.log.append(Observation(i, self.t, tuple(int(c) for c in new)))
                fresh = new[merged_flat[new] == UNKNOWN]
                merged_flat[fresh] = self._flat_truth[fresh]
                self.known_observable += int(self._observable[fresh].sum())
        self.curve.add(self.t, self.coverage)
        cfg = self.config
        if cfg.stop_on_target and self.coverage >= cfg.target_ratio:
            self._finish("complete")
        elif self.t >= cfg.timeout - 1e-9:
            self._finish("timeout")

    def _finish(self, reason):
        self.done = True
        self.termination = reason
        self.log.append(Termination(reason, self.t))

    def _select(self, i: int, snapshot: StrategyInput, goal: Optional[Pose]) -> Optional[Pose]:
        cfg = self.config
        inp = replace(snapshot, self_id=i)
        rb = self.robots[i]
        p = {k: v for k, v in cfg.strategy_params.items() if k not in ("step", "iterations", "provider")}
        try:
            if goal is not None:
                return goal_conditioned_strategy(inp, goal)
            if cfg.strategy == "cost":
                return cost_strategy(inp, **p)
            if cfg.strategy == "field":
                return field_strategy(inp, **p)
            if cfg.strategy == "sample":
                return sample_strategy(inp, rb.rrt, **p)
            g = self._goal_provider(rb, self.merged, snapshot.poses[i], self.t)
            return goal_conditioned_strategy(inp, g)
        except NoFrontier:
            return None
        except ExploreBenchError as exc:
            raise StrategyError(f"robot {i} at t={self.t}: {exc}") from exc

    def step(self, global_goals=None, direct=False):
        """Advance one decision period.

        ``global_goals`` (one pose per robot, or ``None``) are routed through
        the goal-conditioned strategy; without them the configured strategy
        picks goals. With ``direct`` the given goals are driven to as-is,
        planning through unknown space but only executing known free cells.
        Returns ``(observation, done, info)``.
        """
        if not self._reset_done:
            raise NotReset("call reset() before step()")
        if self.done:
            return self.observation(), True, self._info([], [])
        cfg = self.config
        n = len(self.robots)
        clamped = [False] * n
        if global_goals is not None:
            if len(global_goals) != n:
                raise ValueError(f"expected {n} goals, got {len(global_goals)}")
            global_goals = [self._clamp(i, g, clamped) for i, g in enumerate(global_goals)]
        if direct:
            if global_goals is None:
                raise ValueError("direct stepping needs goals")
            goals = list(global_goals)
        else:
            snapshot = StrategyInput(self.merged, self.poses(), 0)
            goals = [self._select(i, snapshot, None if global_goals is None else global_goals[i])
                     for i in range(n)]
        if all(g is None for g in goals):
            self._finish("no_frontier")
            return self.observation(), True, self._info(clamped, goals)
        for i, g in enumerate(goals):
            if g is not None:
                self.log.append(Goal(i, self.t, world_to_cell(g, self.truth)))
        budget = cfg.decision_period
        for i, g in enumerate(goals):
            if g is None:
                continue
            self._move(i, world_to_cell(g, self.truth), budget, optimistic=direct)
        self.round += 1
        self.t = self.round * cfg.decision_period
        self._sense()
        return self.observation(), self.done, self._info(clamped, goals)

    def _clamp(self, i, g: Pose, clamped) -> Pose:
        eps = 1e-6
        x0, y0 = self.truth.origin
        x1 = x0 + self.truth.width * self.truth.resolution - eps
        y1 = y0 + self.truth.height * self.truth.resolution - eps
        x = min(max(g.x, x0), x1)
        y = min(max(g.y, y0), y1)
        if (x, y) != (g.x, g.y):
            clamped[i] = True
            return Pose(x, y, g.theta)
        return g

    def _info(self, clamped, goals):
        return {"t": self.t, "coverage": self.coverage, "clamped": clamped,
                "no_frontier": [g is None for g in goals], "termination": self.termination}

    def _move(self, i, goal_cell, budget, optimistic=False):
        rb = self.robots[i]
        if goal_cell == rb.cell:
            return
        blocked = [r.cell for j, r in enumerate(self.robots) if j != i]
        try:
            path = plan(rb.cell, goal_cell, self.merged, self.config.v_max, blocked=blocked,
                        unknown_traversable=optimistic)
        except (NoPath, InvalidStart):
            return
        if optimistic:
            known = self.merged.cells[path.cells[:, 0], path.cells[:, 1]] == FREE
            stop = int(np.argmin(known)) if not known.all() else len(known)
            if stop < 2:
                return
            path = replace(path, cells=path.cells[:stop])
        _, _, _, at = step_along(path, self.t, budget)
        if at == 0:
            return
        cell = (int(path.cells[at, 0]), int(path.cells[at, 1]))
        elapsed = at * path.resolution / path.v_max
        rb.cell = cell
        self.log.append(Move(i, self.t, cell, at, elapsed))
        self.trajectory.append((self.t + elapsed, i, cell[0], cell[1]))

    # -- results ----------------------------------------------------------

    def metrics(self, free_only: bool = False) -> RunMetrics:
        """Summarize the run.

        Args:
            free_only: count only free cells in the per-robot areas and the
                overlap terrain instead of every observable cell.
        """
        cfg = self.config
        res = self.truth.resolution
        terrain = self._observable
        if free_only:
            terrain = terrain & (self.truth.cells.reshape(-1) == FREE)
        sets = [set(np.flatnonzero((r.local.cells.reshape(-1) != UNKNOWN) & terrain).tolist())
                for r in self.robots]
        areas = [len(s) * res ** 2 for s in sets]
        r_o = overlap_ratio(sets, int(terrain.sum())) if len(sets) >= 2 else 0.0
        return RunMetrics(
            T_topo=time_at_ratio(self.curve, cfg.topo_ratio),
            T_total=time_at_ratio(self.curve, cfg.target_ratio),
            S_i=areas, sigma=sigma(areas), r_o=r_o,
            S_total=self.total_observable * res ** 2,
            seed=cfg.seed, config_hash=cfg.config_hash(),
            final_ratio=self.coverage, sim_time=self.t, termination=self.termination,
            scenario=cfg.scenario_name, strategy=cfg.strategy, n_robots=cfg.n_robots,
            spawn_mode=cfg.spawn_mode,
        )


def run(config: RunConfig):
    """Run to completion (coverage target, no frontiers left, or timeout)."""
    sim = Simulation(config)
    sim.reset()
    while not sim.done:
        sim.step()
    return sim.metrics(), sim.log


def run_simulation(config: RunConfig) -> Simulation:
    """Like :func:`run` but returns the finished engine (maps, curve, trajectory)."""
    sim = Simulation(config)
    sim.reset()
    while not sim.done:
        sim.step()
    return sim


def _run_one(args):
    config, return_logs = args
    try:
        metrics, elog = run(config)
    except Exception as exc:  # isolated per config; the batch carries on
        log.warning("run %s failed: %s", config.config_hash(), exc)
        m = RunMetrics.failed(f"{type(exc).__name__}: {exc}", config.seed, config.config_hash(),
                              scenario=config.scenario_name, strategy=config.strategy,
                              n_robots=config.n_robots, spawn_mode=config.spawn_mode)
        return (m, None) if return_logs else m
    return (metrics, elog.to_jsonl()) if return_logs else metrics


def default_workers() -> int:
    cap = os.environ.get("EXPLORE_BENCH_WORKERS")
    n = os.cpu_count() or 1
    return max(1, min(n, int(cap))) if cap else n


def run_batch(configs, workers: int = 1, return_logs: bool = False) -> list:
    """Run configs, in order, on up to ``workers`` processes.

    With ``return_logs`` each item is ``(RunMetrics, event-log bytes)``.
    """
    if workers < 1:
        raise ValueError("workers must be at least 1")
    jobs = [(c, return_logs) for c in configs]
    if not jobs:
        return []
    if workers == 1 or len(jobs) == 1:
        return [_run_one(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=min(workers, len(jobs))) as pool:
        return list(pool.map(_run_one, jobs))
