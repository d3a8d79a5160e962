"""Efficiency (T_topo, T_total) and collaboration (sigma, r_o) metrics."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Iterable, Optional

from .errors import EmptyInput, InvalidInput, InvalidRatio, MalformedLog
from .events import Observation

TOPO_RATIO = 0.90
TARGET_RATIO = 0.99


@dataclass
class CoverageCurve:
    """Explored ratio over simulated time; times strictly increase, ratios never drop."""

    times: list = field(default_factory=list)
    ratios: list = field(default_factory=list)

    def add(self, t: float, ratio: float):
        if self.times and t <= self.times[-1]:
            raise ValueError(f"sample time {t} not after {self.times[-1]}")
        if self.ratios and ratio < self.ratios[-1]:
            raise ValueError(f"coverage dropped from {self.ratios[-1]} to {ratio}")
        if not 0.0 <= ratio <= 1.0:
            raise ValueError(f"ratio {ratio} outside [0, 1]")
        self.times.append(float(t))
        self.ratios.append(float(ratio))

    @property
    def samples(self) -> list[tuple[float, float]]:
        return list(zip(self.times, self.ratios))

    @classmethod
    def from_samples(cls, samples) -> "CoverageCurve":
        c = cls()
        for t, r in samples:
            c.add(t, r)
        return c

    def __len__(self):
        return len(self.times)


def time_at_ratio(curve: CoverageCurve, r: float) -> Optional[float]:
    """Earliest sample time whose ratio reaches ``r``; ``None`` if never reached."""
    if not 0.0 < r <= 1.0:
        raise InvalidRatio(f"ratio must be in (0, 1], got {r}")
    for t, x in zip(curve.times, curve.ratios):
        if x >= r:
            return t
    return None


def sigma(areas: Iterable[float]) -> float:
    """Population standard deviation of per-robot explored areas."""
    areas = [float(a) for a in areas]
    if not areas:
        raise EmptyInput("no areas given")
    if any(a < 0 for a in areas):
        raise InvalidInput("areas must be non-negative")
    mean = math.fsum(areas) / len(areas)
    return math.sqrt(math.fsum((a - mean) ** 2 for a in areas) / len(areas))


def overlap_ratio(per_robot_known, total_cells: int) -> float:
    """Share of the terrain observed by more than one robot.

    ``S_o`` counts each cell once per extra observer, ``sum |K_i| - |union K_i|``,
    which equals ``sum S_i - S_total`` once the union covers the terrain.
    """
    sets = [set(k) for k in per_robot_known]
    if len(sets) < 2:
        raise InvalidInput("overlap needs at least two robots")
    if total_cells <= 0:
        raise InvalidInput("terrain must have positive size")
    union = set().union(*sets)
    return (sum(len(s) for s in sets) - len(union)) / total_cells


def attribute_coverage(events, resolution: float, n_robots: int | None = None):
    """Per-robot observed cell sets and areas (m^2) from an event stream.

    Returns ``(known_sets, areas)``; robot ids absent from the log get an
    empty set when ``n_robots`` is given.
    """
    known: dict[int, set] = {}
    last_t = -math.inf
    for e in events:
        if not isinstance(e, Observation):
            continue
        if not isinstance(e.robot, int) or e.robot < 0 or e.t < last_t:
            raise MalformedLog(f"bad observation event {e!r}")
        last_t = e.t
        known.setdefault(e.robot, set()).update(e.cells)
    n = n_robots if n_robots is not None else (max(known) + 1 if known else 0)
    if known and max(known) >= n:
        raise MalformedLog(f"robot id {max(known)} beyond {n} robots")
    sets = [known.get(i, set()) for i in range(n)]
    return sets, [len(s) * resolution ** 2 for s in sets]


@dataclass
class RunMetrics:
    T_topo: Optional[float]
    T_total: Optional[float]
    S_i: list
    sigma: float
    r_o: float
    S_total: float
    seed: int
    config_hash: str
    final_ratio: float = 0.0
    sim_time: float = 0.0
    termination: str = ""
    scenario: str = ""
    strategy: str = ""
    n_robots: int = 1
    spawn_mode: str = ""
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    CSV_COLUMNS = ("scenario", "strategy", "n_robots", "spawn_mode", "seed",
                   "T_topo", "T_total", "sigma", "r_o")

    def csv_row(self) -> list:
        return [getattr(self, c) if getattr(self, c) is not None else "" for c in self.CSV_COLUMNS]

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_COLUMNS)
        w.writerow(self.csv_row())
        return buf.getvalue()

    @classmethod
    def failed(cls, error: str, seed: int = 0, config_hash: str = "", **kw) -> "RunMetrics":
        return cls(None, None, [], 0.0, 0.0, 0.0, seed, config_hash, error=error, **kw)
