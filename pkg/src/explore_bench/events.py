"""Run event log: observations, goals, moves and termination."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Union

import numpy as np

from .errors import MalformedLog
from .grid import OccupancyGrid, UNKNOWN


@dataclass(frozen=True)
class Observation:
    """Cells that became known in ``robot``'s own map at time ``t`` (flat indices)."""

    robot: int
    t: float
    cells: tuple[int, ...]


@dataclass(frozen=True)
class Goal:
    robot: int
    t: float
    cell: tuple[int, int]


@dataclass(frozen=True)
class Move:
    robot: int
    t: float
    cell: tuple[int, int]
    cells_moved: int
    elapsed: float


@dataclass(frozen=True)
class Termination:
    reason: str
    t: float


Event = Union[Observation, Goal, Move, Termination]

_TAGS = {Observation: "obs", Goal: "goal", Move: "move", Termination: "end"}


def _encode(ev: Event) -> dict:
    d = {"type": _TAGS[type(ev)], "t": ev.t}
    if isinstance(ev, Observation):
        d.update(robot=ev.robot, cells=list(ev.cells))
    elif isinstance(ev, Goal):
        d.update(robot=ev.robot, cell=list(ev.cell))
    elif isinstance(ev, Move):
        d.update(robot=ev.robot, cell=list(ev.cell), cells_moved=ev.cells_moved, elapsed=ev.elapsed)
    else:
        d.update(reason=ev.reason)
    return d


def _decode(d: dict) -> Event:
    kind = d.get("type")
    try:
        if kind == "obs":
            return Observation(int(d["robot"]), float(d["t"]), tuple(int(c) for c in d["cells"]))
        if kind == "goal":
            return Goal(int(d["robot"]), float(d["t"]), tuple(d["cell"]))
        if kind == "move":
            return Move(int(d["robot"]), float(d["t"]), tuple(d["cell"]), int(d["cells_moved"]),
                        float(d["elapsed"]))
        if kind == "end":
            return Termination(str(d["reason"]), float(d["t"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise MalformedLog(f"bad {kind} event: {exc}") from None
    raise MalformedLog(f"unknown event type {kind!r}")


@dataclass
class EventLog:
    events: list = field(default_factory=list)
    width: int = 0   # grid width, to turn flat indices back into cells

    def append(self, ev: Event):
        if self.events and ev.t < self.events[-1].t:
            raise MalformedLog(f"event at t={ev.t} precedes t={self.events[-1].t}")
        self.events.append(ev)

    def __iter__(self):
        return iter(self.events)

    def __len__(self):
        return len(self.events)

    def of_type(self, kind) -> list:
        return [e for e in self.events if isinstance(e, kind)]

    def to_jsonl(self) -> bytes:
        lines = [json.dumps({"type": "header", "width": self.width}, separators=(",", ":"))]
        lines += [json.dumps(_encode(e), separators=(",", ":")) for e in self.events]
        return ("\n".join(lines) + "\n").encode()

    @classmethod
    def from_jsonl(cls, data: Union[bytes, str, Iterable[str]]) -> "EventLog":
        if isinstance(data, bytes):
            data = data.decode()
        if isinstance(data, str):
            data = data.splitlines()
        log = cls()
        for line in data:
            if not line.strip():
                continue
            try:
                d = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLog(str(exc)) from None
            if d.get("type") == "header":
                log.width = int(d.get("width", 0))
                continue
            log.append(_decode(d))
        return log


def replay(log: EventLog, truth: OccupancyGrid, n_robots: int | None = None):
    """Rebuild per-robot local maps and the merged map from observation events."""
    obs = log.of_type(Observation)
    if n_robots is None:
        n_robots = 1 + max((e.robot for e in obs), default=0)
    flat_truth = truth.cells.reshape(-1)
    locals_ = [truth.blank_like() for _ in range(n_robots)]
    merged = truth.blank_like()
    for e in obs:
        idx = np.fromiter(e.cells, dtype=np.int64, count=len(e.cells))
        locals_[e.robot].cells.reshape(-1)[idx] = flat_truth[idx]
        merged.cells.reshape(-1)[idx] = flat_truth[idx]
    return locals_, merged


def known_cells(grid: OccupancyGrid) -> np.ndarray:
    return np.flatnonzero(grid.cells.reshape(-1) != UNKNOWN)
