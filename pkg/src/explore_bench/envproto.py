"""Newline-delimited JSON driver for :class:`Simulation` over stdin/stdout.

Requests, one JSON object per line:

* ``{"type": "reset", "config": {...}}``: ``config`` holds ``RunConfig``
  fields; ``scenario`` is a builtin name or ``{"path": "<map stem>"}``.
* ``{"type": "step", "goals": [[x, y], ...]}``: one world goal per robot.
* ``{"type": "close"}``

Replies are ``obs`` while the episode runs, ``done`` (observation plus
metrics) once it terminates, and ``error`` for bad requests. The map is sent
as base64 of the row-major int8 cells (0 free, 100 occupied, -1 unknown).
"""

from __future__ import annotations

import base64
import json
import logging
import sys

import numpy as np

from .engine import EnvObservation, RunConfig, Simulation
from .errors import ExploreBenchError, NotReset
from .grid import Pose
from .mapio import load_scenario

log = logging.getLogger(__name__)


def encode_observation(obs: EnvObservation, include_map: bool = True) -> dict:
    g = obs.merged_map
    msg = {"t": obs.t, "coverage": obs.coverage,
           "poses": [p.as_list() for p in obs.poses]}
    if include_map:
        msg["map"] = {"shape": list(g.shape), "resolution": g.resolution,
                      "origin": list(g.origin),
                      "data": base64.b64encode(np.ascontiguousarray(g.cells).tobytes()).decode()}
    return msg


def decode_map(m: dict) -> np.ndarray:
    raw = base64.b64decode(m["data"])
    return np.frombuffer(raw, dtype=np.int8).reshape(m["shape"])


def config_from_message(cfg: dict | str) -> RunConfig:
    if isinstance(cfg, str):
        return RunConfig(scenario=cfg)
    cfg = dict(cfg)
    scen = cfg.get("scenario", "room")
    if isinstance(scen, dict):
        cfg["scenario"] = load_scenario(scen["path"])
        cfg.setdefault("spawn_mode", "explicit")
    return RunConfig.from_dict(cfg)


def _goal(g) -> Pose:
    if isinstance(g, dict):
        return Pose(float(g["x"]), float(g["y"]), float(g.get("theta", 0.0)))
    return Pose(*map(float, g))


class EnvServer:
    """Protocol state machine; ``handle`` maps one request dict to one reply dict."""

    def __init__(self):
        self.sim: Simulation | None = None
        self.include_map = True

    def handle(self, req: dict) -> dict:
        kind = req.get("type")
        if kind == "reset":
            self.sim = Simulation(config_from_message(req.get("config", {})))
            self.include_map = bool(req.get("include_map", True))
            obs = self.sim.reset()
            return self._reply(obs, self.sim.done, {"t": obs.t, "coverage": obs.coverage})
        if kind == "step":
            if self.sim is None:
                raise NotReset("reset before step")
            goals = req.get("goals")
            goals = None if goals is None else [_goal(g) for g in goals]
            obs, done, info = self.sim.step(goals)
            return self._reply(obs, done, info)
        raise ValueError(f"unknown message type {kind!r}")

    def _reply(self, obs, done, info) -> dict:
        msg = {"type": "done" if done else "obs", **encode_observation(obs, self.include_map),
               "info": info}
        if done:
            msg["termination"] = self.sim.termination
            msg["metrics"] = self.sim.metrics().to_dict()
        return msg


def serve(inp=None, out=None) -> int:
    """Answer requests until ``close`` or end of input."""
    inp = inp or sys.stdin
    out = out or sys.stdout
    server = EnvServer()
    for line in inp:
        if not line.strip():
            continue
        try:
            req = json.loads(line)
            if not isinstance(req, dict):
                raise ValueError("request must be a JSON object")
            if req.get("type") == "close":
                break
            reply = server.handle(req)
        except (ExploreBenchError, ValueError, KeyError, TypeError) as exc:
            reply = {"type": "error", "error": type(exc).__name__, "message": str(exc)}
        out.write(json.dumps(reply, separators=(",", ":")) + "\n")
        out.flush()
    return 0
