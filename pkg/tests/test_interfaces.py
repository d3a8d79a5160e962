import io
import json
import subprocess
import sys

import numpy as np
import pytest

from explore_bench import RunConfig, load_map, load_scenario
from explore_bench.bench import (
    MISSING, ExperimentSpec, batch_speed, report_table, speed_corridor, speed_task,
)
from explore_bench.cli import main
from explore_bench.engine import run
from explore_bench.envproto import EnvServer, decode_map, serve
from explore_bench.grid import is_connected
from explore_bench.metrics import RunMetrics
from oracles import narrow_segments, obstacle_islands


# -- NDJSON environment ------------------------------------------------------

def _session(lines):
    out = io.StringIO()
    serve(io.StringIO("\n".join(json.dumps(m) if isinstance(m, dict) else m for m in lines)
                      + "\n"), out)
    return [json.loads(line) for line in out.getvalue().splitlines()]


def test_env_protocol_session():
    replies = _session([
        {"type": "step", "goals": [[1, 1]]},
        {"type": "reset", "config": {"scenario": "loop", "n_robots": 2}},
        {"type": "step", "goals": [[3.0, 3.0], [-10, 3.0]]},
        "not json",
        {"type": "jump"},
        {"type": "close"},
        {"type": "reset", "config": "loop"},     # after close: ignored
    ])
    assert [r["type"] for r in replies] == ["error", "obs", "obs", "error", "error"]
    assert replies[0]["error"] == "NotReset"
    obs = replies[1]
    grid = decode_map(obs["map"])
    assert grid.shape == tuple(obs["map"]["shape"]) and grid.dtype == np.int8
    assert set(np.unique(grid)) <= {-1, 0, 100}
    assert replies[2]["info"]["clamped"] == [False, True]
    assert replies[2]["t"] == 1.0


def test_env_runs_to_done_with_metrics():
    server = EnvServer()
    msg = server.handle({"type": "reset", "config": {"scenario": "loop"}, "include_map": False})
    steps = 0
    while msg["type"] != "done":
        # goal-free steps use the configured strategy
        msg = server.handle({"type": "step"})
        steps += 1
    assert msg["termination"] == "complete"
    assert msg["metrics"]["T_total"] == msg["t"]
    assert msg["metrics"] == run(RunConfig("loop"))[0].to_dict()
    assert "map" not in msg


# -- bench -----------------------------------------------------------------

def _m(scen, strat, n, t, ok=True):
    return RunMetrics(t / 2, t, [1.0] * n, 0.5, 0.1, 10.0, 0, "h", scenario=scen, strategy=strat,
                      n_robots=n, spawn_mode="far", error=None if ok else "boom")


def test_report_table_shapes():
    six = ["loop", "corridor", "corner", "room", "comb1", "comb2"]
    ms = [_m(s, st, 1, 10.0) for s in six for st in ("cost", "field")]
    t = report_table(ms)
    assert len(t.rows) == 6 and len(t.header) - 2 == 4
    multi = report_table([_m("room", st, 2, 10.0) for st in ("cost", "field")])
    assert [h.split(":")[1] for h in multi.header[2:6]] == ["T_topo", "T_total", "sigma", "r_o"]


def test_report_table_marks_failures_and_means():
    ms = [_m("room", "cost", 1, 10.0), _m("room", "cost", 1, 20.0), _m("room", "field", 1, 5.0),
          _m("room", "field", 1, 0.0, ok=False)]
    row = report_table(ms).rows[0]
    assert row[2:4] == ["7.5", "15.0"]
    assert row[4:6] == [MISSING, MISSING]
    assert "| room |" in report_table(ms).to_markdown()


def test_experiment_spec_parsing():
    spec = ExperimentSpec.from_dict({"experiments": [
        {"scenarios": ["room"], "strategies": ["cost", "field"], "seeds": 2,
         "spawn_modes": ["far", "close"]}]})
    assert len(spec.configs()) == 8
    with pytest.raises(ValueError):
        ExperimentSpec.from_dict({"experiments": []})
    with pytest.raises(Exception):
        ExperimentSpec.from_dict({"experiments": [{"scenario": "mars", "strategy": "cost"}]})


def test_speed_corridor_task():
    sc = speed_corridor()
    assert sc.validate() == []
    r = speed_task(sc)
    assert r["sim_time"] == pytest.approx(10.0)
    assert r["travel_time"] == pytest.approx(10.0)
    assert r["speedup"] > 1


def test_batch_speed_report_fields():
    r = batch_speed(2, n_runs=2, config=RunConfig("loop"))
    assert r["all_ok"] and r["n_runs"] == 2 and r["batch_wall"] > 0


# -- CLI -------------------------------------------------------------------

def test_cli_run_artifacts_and_determinism(tmp_path):
    args = ["run", "--scenario", "room", "--strategy", "field", "--robots", "1", "--seed", "0"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ["metrics.json", "coverage.csv", "trajectory.csv", "final_map.pgm",
                 "final_map.yaml", "events.jsonl", "meta.json"]:
        assert (tmp_path / "a" / name).exists()
    a = (tmp_path / "a" / "metrics.json").read_bytes()
    assert a == (tmp_path / "b" / "metrics.json").read_bytes()
    assert (tmp_path / "a" / "events.jsonl").read_bytes() == \
        (tmp_path / "b" / "events.jsonl").read_bytes()
    m = json.loads(a)
    assert m["T_topo"] < m["T_total"]
    load_map(tmp_path / "a" / "final_map.yaml")


def test_cli_usage_errors(capsys):
    with pytest.raises(SystemExit) as e:
        main(["run", "--strategy", "greedy"])
    assert e.value.code == 2
    assert "usage" in capsys.readouterr().err
    assert main(["run", "--scenario", "atlantis"]) == 2


def test_cli_gen(tmp_path):
    assert main(["gen", "--kind", "rooms", "--extent", "20x20", "--seed", "3",
                 "--out", str(tmp_path / "r")]) == 0
    sc = load_scenario(tmp_path / "r")
    assert sc.validate() == [] and is_connected(sc.ground_truth.cells)
    assert main(["gen", "--kind", "corridor", "--width", "0.1", "--out", str(tmp_path / "c")]) == 1
    assert not (tmp_path / "c.pgm").exists()
    assert main(["gen", "--kind", "combination", "--elements", "loop,corridor,corridor",
                 "--out", str(tmp_path / "k")]) == 0
    cells = load_scenario(tmp_path / "k").ground_truth.cells
    assert obstacle_islands(cells) and len(narrow_segments(cells, 20, 20)) >= 2


def test_cli_export_map_and_run_from_file(tmp_path):
    assert main(["export-map", "loop", "--out", str(tmp_path / "loop")]) == 0
    for ext in (".pgm", ".yaml", ".json"):
        assert (tmp_path / f"loop{ext}").exists()
    assert main(["run", "--scenario", str(tmp_path / "loop"), "--robots", "2",
                 "--out", str(tmp_path / "o")]) == 0


def test_cli_bench(tmp_path):
    spec = {"experiments": [{"scenarios": ["loop"], "strategies": ["cost", "field"],
                             "robots": 2, "seeds": [0]}]}
    p = tmp_path / "spec.json"
    p.write_text(json.dumps(spec))
    assert main(["bench", str(p), "--out", str(tmp_path / "b"), "--workers", "1"]) == 0
    lines = (tmp_path / "b" / "table.csv").read_text().splitlines()
    assert lines[0].count(",") == 2 + 8 - 1
    assert (tmp_path / "b" / "table.md").exists()


def test_console_entry_point_env_subprocess():
    req = json.dumps({"type": "reset", "config": "corridor", "include_map": False})
    out = subprocess.run([sys.executable, "-m", "explore_bench", "env"], input=req + "\n",
                         capture_output=True, text=True, timeout=120)
    assert out.returncode == 0
    assert json.loads(out.stdout.splitlines()[0])["type"] == "obs"
