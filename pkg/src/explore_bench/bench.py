"""Experiment sweeps, result tables, and the speed benchmark."""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import yaml

from .engine import RunConfig, Simulation, run_batch
from .errors import UnknownName
from .events import Move
from .exploration import check_strategy_name
from .grid import FREE, OCCUPIED, OccupancyGrid, Scenario, cell_to_world
from .scenarios import BUILTIN_NAMES

MISSING = "—"


@dataclass
class Experiment:
    scenarios: list
    strategies: list
    n_robots: int = 1
    spawn_modes: list = field(default_factory=lambda: ["far"])
    seeds: list = field(default_factory=lambda: [0])
    params: dict = field(default_factory=dict)   # extra RunConfig fields


@dataclass
class ExperimentSpec:
    experiments: list
    out: str = "results"
    format: str = "both"

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentSpec":
        """Singular or plural keys are accepted (``scenario``/``scenarios``);
        an integer ``seeds`` means ``range(seeds)``."""
        exps = []
        try:
            for e in d.get("experiments", []):
                def many(one, plural, default=None):
                    v = e.get(plural, e.get(one, default))
                    if v is None:
                        raise ValueError(f"experiment is missing {plural!r}")
                    return [v] if isinstance(v, (str, int)) else list(v)
                seeds = e.get("seeds", [0])
                if isinstance(seeds, int):
                    seeds = list(range(seeds))
                exps.append(Experiment(many("scenario", "scenarios"),
                                       many("strategy", "strategies"),
                                       int(e.get("robots", e.get("n_robots", 1))),
                                       many("spawn_mode", "spawn_modes", ["far"]),
                                       list(seeds), dict(e.get("params", {}))))
        except (AttributeError, TypeError) as exc:
            raise ValueError(f"malformed experiment spec: {exc}") from None
        spec = cls(exps, d.get("out", "results"), d.get("format", "both"))
        spec.validate()
        return spec

    @classmethod
    def load(cls, path) -> "ExperimentSpec":
        # YAML is a superset of JSON, so one loader covers both formats
        try:
            data = yaml.safe_load(Path(path).read_text())
        except yaml.YAMLError as e:
            raise ValueError(f"cannot parse experiment spec: {e}") from None
        return cls.from_dict(data)

    def validate(self):
        if not self.experiments:
            raise ValueError("experiment spec is empty")
        for e in self.experiments:
            for s in e.scenarios:
                if s not in BUILTIN_NAMES:
                    raise UnknownName(f"unknown scenario {s!r}")
            for s in e.strategies:
                check_strategy_name(s)
            if not e.seeds:
                raise ValueError("experiment needs at least one seed")

    def configs(self) -> list[RunConfig]:
        out = []
        for e in self.experiments:
            for sc in e.scenarios:
                for mode in e.spawn_modes:
                    for strat in e.strategies:
                        for seed in e.seeds:
                            out.append(RunConfig(sc, e.n_robots, strat, seed=seed, spawn_mode=mode,
                                                 **e.params))
        return out


@dataclass
class Table:
    header: list
    rows: list

    def to_markdown(self) -> str:
        lines = ["| " + " | ".join(self.header) + " |",
                 "|" + "|".join("---" for _ in self.header) + "|"]
        lines += ["| " + " | ".join(str(c) for c in row) + " |" for row in self.rows]
        return "\n".join(lines) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.header)
        w.writerows(self.rows)
        return buf.getvalue()


def _fmt(values, digits):
    if not values or any(v is None for v in values):
        return MISSING
    return f"{float(np.mean(values)):.{digits}f}"


def report_table(metrics: list) -> Table:
    """Rows: scenario x spawn mode (x robots); columns: strategy x metric, seed means.

    A cell is ``—`` when any seed failed or never reached the ratio.
    """
    strategies = list(dict.fromkeys(m.strategy for m in metrics))
    multi = any(m.n_robots > 1 for m in metrics)
    cols = [("T_topo", 1), ("T_total", 1)] + ([("sigma", 3), ("r_o", 3)] if multi else [])
    robot_counts = sorted({m.n_robots for m in metrics})
    keyed = {}
    for m in metrics:
        keyed.setdefault((m.scenario, m.spawn_mode, m.n_robots), {}).setdefault(m.strategy, []).append(m)
    header = ["scenario", "spawn"] + (["robots"] if len(robot_counts) > 1 else [])
    header += [f"{s}:{c}" for s in strategies for c, _ in cols]
    rows = []
    for (scen, mode, n), by_strat in keyed.items():
        row = [scen, mode] + ([n] if len(robot_counts) > 1 else [])
        for s in strategies:
            runs = by_strat.get(s, [])
            for c, digits in cols:
                vals = [None if not m.ok else getattr(m, c) for m in runs]
                row.append(_fmt(vals, digits))
        rows.append(row)
    return Table(header, rows)


def run_bench(spec: ExperimentSpec, workers: int = 1):
    metrics = run_batch(spec.configs(), workers)
    return metrics, report_table(metrics)


# -- speed ------------------------------------------------------------------

SPEED_CORRIDOR_LENGTH = 10.0


def speed_corridor(resolution: float = 0.1, length: float = SPEED_CORRIDOR_LENGTH,
                   width: float = 1.0) -> Scenario:
    """A straight corridor whose end cells are ``length`` meters apart (center to center)."""
    n = int(round(length / resolution)) + 1
    k = int(round(width / resolution))
    cells = np.full((k + 2, n + 2), OCCUPIED, dtype=np.int8)
    cells[1:-1, 1:-1] = FREE
    grid = OccupancyGrid(cells, resolution)
    mid = 1 + k // 2
    spawns = [cell_to_world((mid, 1), grid), cell_to_world((mid, n), grid)]
    return Scenario(grid, spawns, "speed-corridor", {"kind": "speed", "length": length, "width": width})


def speed_task(scenario: Scenario | None = None) -> dict:
    """Drive one robot end to end through the corridor, scanning every period."""
    sc = scenario or speed_corridor()
    cfg = RunConfig(sc, 1, "goal", spawn_mode="explicit", stop_on_target=False)
    sim = Simulation(cfg)
    start = time.perf_counter()
    sim.reset()
    goal = sc.spawns[1]
    end_cell = sc.spawn_cells()[1]
    steps = 0
    while sim.robots[0].cell != end_cell:
        sim.step([goal], direct=True)
        steps += 1
        if steps > 10_000:
            raise RuntimeError("robot never reached the end of the corridor")
    wall = time.perf_counter() - start
    travel = sum(e.elapsed for e in sim.log.of_type(Move))
    return {"sim_time": sim.t, "travel_time": travel, "wall_time": wall,
            "speedup": sim.t / wall if wall > 0 else math.inf,
            "coverage": sim.coverage, "periods": steps}


def batch_speed(workers: int, n_runs: int = 8, config: RunConfig | None = None) -> dict:
    """Wall-clock of one exploration run versus ``n_runs`` copies on ``workers`` processes."""
    cfg = config or RunConfig("corridor", 1, "cost", seed=0)
    t0 = time.perf_counter()
    run_batch([cfg], 1)
    single = time.perf_counter() - t0
    t0 = time.perf_counter()
    results = run_batch([cfg] * n_runs, workers)
    batch = time.perf_counter() - t0
    return {"single_wall": single, "batch_wall": batch, "n_runs": n_runs, "workers": workers,
            "throughput_gain": n_runs * single / batch if batch > 0 else math.inf,
            "all_ok": all(m.ok for m in results)}


def speed_report(workers: int) -> dict:
    task = speed_task()
    batch = batch_speed(workers)
    return {"corridor": task, "batch": batch}
