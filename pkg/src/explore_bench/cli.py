"""``explore-bench`` command line: run, bench, gen, speed, export-map, env."""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .bench import ExperimentSpec, run_bench, speed_report
from .engine import SPAWN_MODES, default_workers, run_simulation
from .envproto import config_from_message, serve
from .errors import ExploreBenchError, UnknownName
from .exploration import STRATEGY_NAMES
from .mapio import load_scenario, save_map, save_scenario
from .scenarios import BUILTIN_NAMES, GenKind, GenSpec, builtin, generate

log = logging.getLogger("explore_bench")


class UsageError(Exception):
    pass


def _extent(text: str) -> tuple[float, float]:
    try:
        w, h = text.lower().split("x")
        return float(w), float(h)
    except ValueError:
        raise argparse.ArgumentTypeError(f"extent must look like 20x20, got {text!r}") from None


def _scenario_arg(name: str):
    if name in BUILTIN_NAMES:
        return name
    p = Path(name)
    if p.with_suffix(".yaml").exists():
        return load_scenario(p)
    raise UsageError(f"unknown scenario {name!r}; use one of {', '.join(BUILTIN_NAMES)} or a map path")


def _write_csv(path: Path, header, rows):
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


# -- subcommands ------------------------------------------------------------

def cmd_run(args) -> int:
    cfg = json.loads(Path(args.config).read_text()) if args.config else {}
    flags = {"scenario": args.scenario, "strategy": args.strategy, "n_robots": args.robots,
             "seed": args.seed, "spawn_mode": args.spawn, "timeout": args.timeout,
             "decision_period": args.period}
    cfg.update({k: v for k, v in flags.items() if v is not None})
    if isinstance(cfg.get("scenario"), str):
        cfg["scenario"] = _scenario_arg(cfg["scenario"])
        if not isinstance(cfg["scenario"], str):
            cfg.setdefault("spawn_mode", "explicit")
    try:
        config = config_from_message(cfg)
    except (TypeError, ValueError, UnknownName) as exc:
        raise UsageError(str(exc)) from None

    started = datetime.now(timezone.utc)
    t0 = time.perf_counter()
    sim = run_simulation(config)
    wall = time.perf_counter() - t0
    metrics = sim.metrics()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "metrics.json").write_text(metrics.to_json())
    _write_csv(out / "coverage.csv", ["t", "ratio"], sim.curve.samples)
    g = sim.truth
    traj = sorted(sim.trajectory, key=lambda r: (r[0], r[1]))
    _write_csv(out / "trajectory.csv", ["t", "robot", "row", "col", "x", "y"],
               [(t, i, r, c, g.origin[0] + (c + 0.5) * g.resolution,
                 g.origin[1] + (r + 0.5) * g.resolution) for t, i, r, c in traj])
    save_map(sim.merged, out / "final_map.pgm")
    (out / "events.jsonl").write_bytes(sim.log.to_jsonl())
    meta = {"started": started.isoformat(), "wall_time": wall, "version": __version__,
            "config": config.to_dict(), "config_hash": config.config_hash()}
    (out / "meta.json").write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    print(f"{config.scenario_name} {config.strategy} x{config.n_robots}: "
          f"T_topo={metrics.T_topo} T_total={metrics.T_total} ({metrics.termination})")
    return 0


def cmd_bench(args) -> int:
    spec = ExperimentSpec.load(args.spec)
    out = Path(args.out or spec.out)
    workers = args.workers or default_workers()
    metrics, table = run_bench(spec, workers)
    out.mkdir(parents=True, exist_ok=True)
    fmt = args.format or spec.format
    if fmt in ("markdown", "both"):
        (out / "table.md").write_text(table.to_markdown())
    if fmt in ("csv", "both"):
        (out / "table.csv").write_text(table.to_csv())
    _write_csv(out / "runs.csv", list(metrics[0].CSV_COLUMNS) + ["error"] if metrics else [],
               [m.csv_row() + [m.error or ""] for m in metrics])
    sys.stdout.write(table.to_markdown())
    failed = sum(not m.ok for m in metrics)
    if failed:
        log.warning("%d of %d runs failed", failed, len(metrics))
    return 0


def cmd_gen(args) -> int:
    params = {}
    if args.width is not None:
        key = {GenKind.LOOP: "loop_width", GenKind.CORRIDOR: "corridor_width"}.get(GenKind(args.kind))
        if key is None:
            raise UsageError("--width applies to loop and corridor only")
        params[key] = args.width
    if args.elements:
        params["elements"] = [e.strip() for e in args.elements.split(",") if e.strip()]
    if args.rooms is not None:
        params["room_count"] = args.rooms
    if args.corners is not None:
        params["n_corners"] = args.corners
    if args.params:
        params.update(json.loads(args.params))
    spec = GenSpec(args.kind, args.extent, args.seed, params, args.resolution)
    sc = generate(spec)   # validates before anything is written
    out = Path(args.out or f"{sc.name}.pgm")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_scenario(sc, out.with_suffix(".pgm"))
    print(out.with_suffix(".yaml"))
    return 0


def cmd_speed(args) -> int:
    report = speed_report(args.workers or default_workers())
    c, b = report["corridor"], report["batch"]
    print(f"corridor 10 m: simulated {c['sim_time']:.1f} s, wall {c['wall_time']:.3f} s, "
          f"speed-up {c['speedup']:.1f}x")
    print(f"batch: {b['n_runs']} runs on {b['workers']} workers in {b['batch_wall']:.2f} s "
          f"(single run {b['single_wall']:.2f} s, throughput {b['throughput_gain']:.2f}x)")
    if args.json:
        Path(args.json).write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_export_map(args) -> int:
    sc = _scenario_arg(args.scenario)
    sc = builtin(sc, args.resolution) if isinstance(sc, str) else sc
    out = Path(args.out or f"{sc.name}.pgm").with_suffix(".pgm")
    out.parent.mkdir(parents=True, exist_ok=True)
    save_scenario(sc, out)
    print(out.with_suffix(".yaml"))
    return 0


def cmd_env(args) -> int:
    return serve()


# -- parser -----------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="explore-bench", description=__doc__)
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run one exploration episode and write artifacts")
    r.add_argument("--scenario", help="builtin name or scenario map path")
    r.add_argument("--strategy", choices=STRATEGY_NAMES)
    r.add_argument("--robots", type=int)
    r.add_argument("--seed", type=int)
    r.add_argument("--spawn", choices=SPAWN_MODES)
    r.add_argument("--timeout", type=float)
    r.add_argument("--period", type=float, help="decision period in simulated seconds")
    r.add_argument("--config", help="JSON file with RunConfig fields; flags override it")
    r.add_argument("--out", default="run_out")
    r.set_defaults(func=cmd_run)

    b = sub.add_parser("bench", help="run an experiment spec and emit the result table")
    b.add_argument("spec")
    b.add_argument("--out")
    b.add_argument("--format", choices=("markdown", "csv", "both"))
    b.add_argument("--workers", type=int)
    b.set_defaults(func=cmd_bench)

    g = sub.add_parser("gen", help="generate a scenario (PGM+YAML+JSON)")
    g.add_argument("--kind", required=True, choices=[k.value for k in GenKind])
    g.add_argument("--extent", type=_extent, default=(20.0, 20.0), help="WxH in meters")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--width", type=float, help="loop or corridor width in meters")
    g.add_argument("--elements", help="comma separated kinds for combination")
    g.add_argument("--rooms", type=int)
    g.add_argument("--corners", type=int)
    g.add_argument("--params", help="extra generator params as JSON")
    g.add_argument("--resolution", type=float, default=0.1)
    g.add_argument("--out")
    g.set_defaults(func=cmd_gen)

    s = sub.add_parser("speed", help="time the corridor task and a parallel batch")
    s.add_argument("--workers", type=int)
    s.add_argument("--json")
    s.set_defaults(func=cmd_speed)

    e = sub.add_parser("export-map", help="write a builtin or loaded scenario as PGM+YAML+JSON")
    e.add_argument("scenario")
    e.add_argument("--resolution", type=float, default=0.1)
    e.add_argument("--out")
    e.set_defaults(func=cmd_export_map)

    v = sub.add_parser("env", help="serve reset/step over NDJSON on stdin/stdout")
    v.set_defaults(func=cmd_env)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)   # exits 2 on bad flags
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        return args.func(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"explore-bench: error: {exc}", file=sys.stderr)
        return 2
    except (ExploreBenchError, OSError, ValueError) as exc:
        print(f"explore-bench: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
