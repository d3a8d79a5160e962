"""PGM + YAML map files (ROS ``map_server`` layout) and scenario sidecars."""

from __future__ import annotations

import json
import re
from pathlib import Path

import numpy as np
import yaml

from .errors import ParseError
from .grid import FREE, OCCUPIED, UNKNOWN, OccupancyGrid, Pose, Scenario

FREE_PIXEL = 254
OCCUPIED_PIXEL = 0
UNKNOWN_PIXEL = 205

DEFAULT_OCCUPIED_THRESH = 0.65
DEFAULT_FREE_THRESH = 0.196

_TOKEN = re.compile(rb"\s*(?:#[^\n]*\n\s*)*(\S+)")


def _read_pgm(data: bytes) -> np.ndarray:
    pos = 0
    tokens = []
    for _ in range(4):
        m = _TOKEN.match(data, pos)
        if m is None:
            raise ParseError("truncated PGM header")
        tokens.append(m.group(1))
        pos = m.end()
    magic = tokens[0]
    if magic not in (b"P5", b"P2"):
        raise ParseError(f"unsupported PGM magic {magic!r}")
    try:
        width, height, maxval = (int(t) for t in tokens[1:])
    except ValueError as exc:
        raise ParseError(f"malformed PGM header: {exc}") from None
    if width <= 0 or height <= 0 or not 0 < maxval < 256:
        raise ParseError(f"unsupported PGM geometry {width}x{height} maxval={maxval}")
    if magic == b"P5":
        body = data[pos + 1:pos + 1 + width * height]
        if len(body) != width * height:
            raise ParseError("PGM raster shorter than header declares")
        img = np.frombuffer(body, dtype=np.uint8)
    else:
        vals = data[pos:].split()
        if len(vals) < width * height:
            raise ParseError("PGM raster shorter than header declares")
        img = np.array([int(v) for v in vals[:width * height]], dtype=np.uint8)
    if maxval != 255:
        img = np.round(img.astype(float) * 255.0 / maxval).astype(np.uint8)
    return img.reshape(height, width)


def _yaml_path(path: Path) -> Path:
    return path if path.suffix in (".yaml", ".yml") else path.with_suffix(".yaml")


def load_map(path, strict: bool = False) -> OccupancyGrid:
    """Load a map from a ``.yaml`` descriptor or a ``.pgm`` with a same-stem sidecar.

    Pixels are classified ROS-style: ``p = (255 - v) / 255`` (inverted when
    ``negate``), occupied if ``p > occupied_thresh``, free if
    ``p < free_thresh``, unknown otherwise. With ``strict`` any pixel other than
    the three canonical gray levels raises ``ValueError``.
    """
    path = Path(path)
    ypath = _yaml_path(path)
    try:
        meta = yaml.safe_load(ypath.read_text())
    except yaml.YAMLError as exc:
        raise ParseError(f"bad map yaml {ypath}: {exc}") from None
    if not isinstance(meta, dict) or "resolution" not in meta:
        raise ParseError(f"{ypath} lacks a resolution key")
    pgm = path if path.suffix == ".pgm" else ypath.parent / meta.get("image", ypath.stem + ".pgm")
    img = _read_pgm(Path(pgm).read_bytes())

    occ_t = float(meta.get("occupied_thresh", DEFAULT_OCCUPIED_THRESH))
    free_t = float(meta.get("free_thresh", DEFAULT_FREE_THRESH))
    if not 0 <= free_t < occ_t <= 1:
        raise ValueError(f"inconsistent thresholds free={free_t} occupied={occ_t}")
    negate = bool(meta.get("negate", 0))
    if strict:
        canon = (FREE_PIXEL, OCCUPIED_PIXEL, UNKNOWN_PIXEL)
        if negate:
            canon = tuple(255 - v for v in canon)
        off = ~np.isin(img, canon)
        if off.any():
            raise ValueError(f"{int(off.sum())} pixels are not ternary gray levels")

    p = img.astype(float) / 255.0 if negate else (255.0 - img) / 255.0
    cells = np.full(img.shape, UNKNOWN, dtype=np.int8)
    cells[p > occ_t] = OCCUPIED
    cells[p < free_t] = FREE
    origin = meta.get("origin", [0.0, 0.0, 0.0])
    # image row 0 is the top of the map (max y)
    return OccupancyGrid(cells[::-1].copy(), float(meta["resolution"]),
                         (float(origin[0]), float(origin[1])))


def save_map(g: OccupancyGrid, path) -> Path:
    """Write ``<stem>.pgm`` and ``<stem>.yaml``; returns the yaml path."""
    path = Path(path)
    pgm = path.with_suffix(".pgm")
    img = np.full(g.shape, UNKNOWN_PIXEL, dtype=np.uint8)
    img[g.cells == FREE] = FREE_PIXEL
    img[g.cells == OCCUPIED] = OCCUPIED_PIXEL
    img = img[::-1]
    header = f"P5\n{g.width} {g.height}\n255\n".encode("ascii")
    pgm.write_bytes(header + img.tobytes())
    meta = {
        "image": pgm.name,
        "mode": "trinary",
        "resolution": g.resolution,
        "origin": [g.origin[0], g.origin[1], 0.0],
        "negate": 0,
        "occupied_thresh": DEFAULT_OCCUPIED_THRESH,
        "free_thresh": DEFAULT_FREE_THRESH,
    }
    ypath = pgm.with_suffix(".yaml")
    ypath.write_text(yaml.safe_dump(meta, sort_keys=True))
    return ypath


def save_scenario(sc: Scenario, path) -> Path:
    """Write the PGM+YAML pair plus a ``.json`` sidecar with spawns and gen params."""
    path = Path(path)
    save_map(sc.ground_truth, path)
    side = {
        "name": sc.name,
        "spawns": [p.as_list() for p in sc.spawns],
        "gen_params": sc.gen_params,
    }
    jpath = path.with_suffix(".json")
    jpath.write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")
    return jpath


def load_scenario(path) -> Scenario:
    path = Path(path)
    grid = load_map(path.with_suffix(".yaml"))
    side = json.loads(path.with_suffix(".json").read_text())
    spawns = [Pose(*map(float, s)) for s in side.get("spawns", [])]
    return Scenario(grid, spawns, side.get("name", path.stem), side.get("gen_params", {}))
