"""Grid-based multi-robot exploration simulator and benchmark harness."""

from .engine import RunConfig, Simulation, run, run_batch, run_simulation
from .errors import ExploreBenchError
from .events import EventLog
from .exploration import (
    cost_strategy, detect_frontiers, field_strategy, goal_conditioned_strategy, sample_strategy,
)
from .grid import FREE, OCCUPIED, UNKNOWN, OccupancyGrid, Pose, Scenario
from .mapio import load_map, load_scenario, save_map, save_scenario
from .metrics import RunMetrics, overlap_ratio, sigma, time_at_ratio
from .motion import plan
from .scenarios import BUILTIN_NAMES, GenKind, GenSpec, builtin, generate
from .sensing import SensorSpec, merge_maps, simulate_scan, update_local_map

__version__ = "0.1.0"

__all__ = [
    "BUILTIN_NAMES", "EventLog", "ExploreBenchError", "FREE", "GenKind", "GenSpec", "OCCUPIED",
    "OccupancyGrid", "Pose", "RunConfig", "RunMetrics", "Scenario", "SensorSpec", "Simulation",
    "UNKNOWN", "builtin", "cost_strategy", "detect_frontiers", "field_strategy", "generate",
    "goal_conditioned_strategy", "load_map", "load_scenario", "merge_maps", "overlap_ratio",
    "plan", "run", "run_batch", "run_simulation", "sample_strategy", "save_map", "save_scenario",
    "sigma", "simulate_scan", "time_at_ratio", "update_local_map",
]
