"""Procedural ternary-matrix scenarios and the six built-in evaluation maps.

Every generator works in cell units on an ``int8`` array whose outer ring is
occupied. Elements:

* loop: a square annulus around a central block, optionally with narrowed
  sections on each side;
* corridor: two open spaces joined by one narrow corridor;
* corner: an open box cluttered with short wall partitions and notches;
* rooms: binary space partition into rooms, one door per partition wall;
* combination: elements laid out on a coarse lattice, neighbors joined by
  doors carved through the shared wall.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

import numpy as np
from scipy import ndimage

from . import _kernels
from .errors import InfeasibleSpec, UnknownName
from .grid import (
    DEFAULT_RESOLUTION, FREE, OCCUPIED, OccupancyGrid, Pose, Scenario, cell_to_world,
    is_connected,
)

ROBOT_FOOTPRINT_CELLS = 1
MIN_PASSAGE_CELLS = ROBOT_FOOTPRINT_CELLS + 2
MIN_EXTENT_M = 5.0
CLOSE_SPAWN_RADIUS_M = 1.0


class GenKind(str, Enum):
    LOOP = "loop"
    CORRIDOR = "corridor"
    CORNER = "corner"
    ROOMS = "rooms"
    COMBINATION = "combination"


@dataclass
class GenSpec:
    """What to generate.

    ``params`` is kind specific:

    * loop: ``loop_width`` (m), ``jitter`` (m), ``narrow_sides`` (0-4),
      ``narrow_width`` / ``narrow_length`` (m)
    * corridor: ``corridor_width``, ``corridor_length`` (m), ``jitter`` (bool)
    * corner: ``n_corners``, ``min_size`` / ``max_size`` (m)
    * rooms: ``room_count``, ``min_room``, ``door_width`` (m)
    * combination: ``elements`` (list of kind names), ``door_width`` (m)
    """

    kind: GenKind
    extent: tuple[float, float] = (20.0, 20.0)
    seed: int = 0
    params: dict[str, Any] = field(default_factory=dict)
    resolution: float = DEFAULT_RESOLUTION

    def __post_init__(self):
        try:
            self.kind = GenKind(self.kind)
        except ValueError:
            raise UnknownName(f"unknown scenario kind {self.kind!r}") from None
        self.extent = (float(self.extent[0]), float(self.extent[1]))

    def as_dict(self) -> dict[str, Any]:
        return {"kind": self.kind.value, "extent": list(self.extent), "seed": int(self.seed),
                "params": dict(self.params), "resolution": self.resolution}


def _cells(meters: float, res: float) -> int:
    return int(round(meters / res))


def _box(h: int, w: int) -> np.ndarray:
    a = np.full((h, w), FREE, dtype=np.int8)
    a[0, :] = a[-1, :] = OCCUPIED
    a[:, 0] = a[:, -1] = OCCUPIED
    return a


def _dims(extent, res):
    w, h = extent
    if w < MIN_EXTENT_M or h < MIN_EXTENT_M:
        raise InfeasibleSpec(f"extent {w}x{h} m is below {MIN_EXTENT_M}x{MIN_EXTENT_M} m")
    return _cells(h, res), _cells(w, res)


# -- elements ---------------------------------------------------------------

def _loop(extent, rng, params, res):
    H, W = _dims(extent, res)
    lw = params.get("loop_width", float(np.clip(0.15 * min(extent), 2.0, 4.0)))
    lw_c = _cells(lw, res)
    if lw_c < MIN_PASSAGE_CELLS:
        raise InfeasibleSpec(f"loop width {lw} m below robot footprint")
    jit = _cells(params.get("jitter", 0.5), res)
    offs = [int(rng.integers(-jit, jit + 1)) if jit else 0 for _ in range(4)]
    top, bottom, left, right = (max(MIN_PASSAGE_CELLS, lw_c + o) for o in offs)
    r0, r1 = 1 + top, H - 1 - bottom
    c0, c1 = 1 + left, W - 1 - right
    if r1 - r0 < 2 or c1 - c0 < 2:
        raise InfeasibleSpec(f"loop width {lw} m leaves no central block in {extent}")
    a = _box(H, W)
    a[r0:r1, c0:c1] = OCCUPIED
    narrow = []
    n_sides = int(params.get("narrow_sides", 0))
    if n_sides:
        nw = _cells(params.get("narrow_width", 1.0), res)
        nl = _cells(params.get("narrow_length", 4.0), res)
        if nw < MIN_PASSAGE_CELLS:
            raise InfeasibleSpec("narrow section below robot footprint")
        # (band rows, band cols) of each side of the annulus, strip along its length
        bands = [
            ((1, r0), (c0, c1), "h"), ((c1, W - 1), (r0, r1), "v"),
            ((r1, H - 1), (c0, c1), "h"), ((1, c0), (r0, r1), "v"),
        ]
        for (a0, a1), (b0, b1), orient in bands[:n_sides]:
            if b1 - b0 < nl or a1 - a0 <= nw:
                raise InfeasibleSpec("narrow section does not fit the loop side")
            mid = (b0 + b1) // 2
            s0, s1 = mid - nl // 2, mid - nl // 2 + nl
            keep0 = (a0 + a1 - nw) // 2
            if orient == "h":
                a[a0:a1, s0:s1] = OCCUPIED
                a[keep0:keep0 + nw, s0:s1] = FREE
                narrow.append([keep0, s0, keep0 + nw, s1])
            else:
                a[s0:s1, a0:a1] = OCCUPIED
                a[s0:s1, keep0:keep0 + nw] = FREE
                narrow.append([s0, keep0, s1, keep0 + nw])
    return a, {"central_block": [r0, c0, r1, c1], "narrow_sections": narrow}


def _corridor(extent, rng, params, res):
    H, W = _dims(extent, res)
    cw = _cells(params.get("corridor_width", 1.5), res)
    if cw < MIN_PASSAGE_CELLS:
        raise InfeasibleSpec(
            f"corridor width {params.get('corridor_width')} m is below the robot footprint "
            f"+ 2 cells ({MIN_PASSAGE_CELLS * res:.1f} m)")
    length = params.get("corridor_length", round(0.3 * extent[0], 1))
    cl = _cells(length, res)
    space = (W - 2 - cl) // 2
    if space < _cells(2.0, res):
        raise InfeasibleSpec(f"corridor length {length} m leaves no room for the two spaces")
    if cw > H - 2:
        raise InfeasibleSpec("corridor wider than the map")
    a = _box(H, W)
    c0, c1 = 1 + space, W - 1 - space
    a[1:H - 1, c0:c1] = OCCUPIED
    lo, hi = 1 + MIN_PASSAGE_CELLS, H - 1 - MIN_PASSAGE_CELLS - cw
    mid = (H - cw) // 2
    r0 = int(rng.integers(lo, hi + 1)) if params.get("jitter", True) and hi > lo else mid
    a[r0:r0 + cw, c0:c1] = FREE
    return a, {"corridor": [r0, c0, r0 + cw, c1],
               "spaces": [[1, 1, H - 1, c0], [1, c1, H - 1, W - 1]]}


def _add_corners(a, rng, n, res, region=None, min_size=1.0, max_size=3.0, tries=60):
    """Attach ``n`` short partitions or notches to the walls of ``region``.

    ``region`` is an interior rectangle ``(r0, c0, r1, c1)``; pieces stay at
    least 1 m from anything they are not attached to so passages stay open.
    """
    H, W = a.shape
    r0, c0, r1, c1 = region if region is not None else (1, 1, H - 1, W - 1)
    gap = _cells(1.0, res)
    thick = 2
    lo, hi = _cells(min_size, res), _cells(max_size, res)
    placed = []
    for _ in range(n):
        for _attempt in range(tries):
            side = int(rng.integers(4))
            length = int(rng.integers(lo, hi + 1))
            if rng.random() < 0.5:
                depth, span = length, thick            # thin partition
            else:
                depth, span = max(lo // 2, thick), length  # notch along the wall
            if side in (0, 2):   # top / bottom wall: piece grows along rows
                pr, pc = depth, span
                if c1 - c0 - pc - 2 * gap <= 0 or pr + gap >= r1 - r0:
                    continue
                cc = int(rng.integers(c0 + gap, c1 - gap - pc + 1))
                rr = r0 if side == 0 else r1 - pr
            else:
                pr, pc = span, depth
                if r1 - r0 - pr - 2 * gap <= 0 or pc + gap >= c1 - c0:
                    continue
                rr = int(rng.integers(r0 + gap, r1 - gap - pr + 1))
                cc = c0 if side == 3 else c1 - pc
            # keep-out window around the piece, excluding the wall it grows from
            wr0, wr1 = max(r0, rr - gap), min(r1, rr + pr + gap)
            wc0, wc1 = max(c0, cc - gap), min(c1, cc + pc + gap)
            if np.any(a[wr0:wr1, wc0:wc1] != FREE):
                continue
            # the wall it grows from must be solid there (no doorway behind it)
            if side == 0:
                backing = a[r0 - 1, wc0:wc1]
            elif side == 2:
                backing = a[r1, wc0:wc1]
            elif side == 3:
                backing = a[wr0:wr1, c0 - 1]
            else:
                backing = a[wr0:wr1, c1]
            if np.any(backing != OCCUPIED):
                continue
            before = a[rr:rr + pr, cc:cc + pc].copy()
            a[rr:rr + pr, cc:cc + pc] = OCCUPIED
            if not is_connected(a):
                a[rr:rr + pr, cc:cc + pc] = before
                continue
            placed.append([rr, cc, rr + pr, cc + pc])
            break
    return placed


def _corner(extent, rng, params, res):
    H, W = _dims(extent, res)
    n = int(params.get("n_corners", max(1, int(extent[0] * extent[1] / 30))))
    a = _box(H, W)
    placed = _add_corners(a, rng, n, res, min_size=params.get("min_size", 1.0),
                          max_size=params.get("max_size", 3.0))
    if len(placed) < n:
        raise InfeasibleSpec(f"could only place {len(placed)} of {n} corners")
    return a, {"corners": placed}


def _rooms(extent, rng, params, res):
    H, W = _dims(extent, res)
    min_room = _cells(params.get("min_room", 3.0), res)
    door = _cells(params.get("door_width", 1.0), res)
    count = int(params.get("room_count", max(2, int(extent[0] * extent[1] // 50))))
    if door < MIN_PASSAGE_CELLS:
        raise InfeasibleSpec("door narrower than robot footprint")
    if count < 1 or count * min_room * min_room > (H - 2) * (W - 2):
        raise InfeasibleSpec(f"{count} rooms of at least {min_room * res} m cannot fit {extent}")
    a = _box(H, W)
    leaves = [(1, 1, H - 1, W - 1)]
    margin = 3
    while len(leaves) < count:
        order = sorted(range(len(leaves)),
                       key=lambda i: (-(leaves[i][2] - leaves[i][0]) * (leaves[i][3] - leaves[i][1]), i))
        for i in order:
            split = _split_leaf(a, leaves[i], rng, min_room, door, margin)
            if split is not None:
                leaves[i:i + 1] = split
                break
        else:
            raise InfeasibleSpec(f"only {len(leaves)} of {count} rooms fit in {extent}")
    return a, {"rooms": [list(leaf) for leaf in leaves]}


def _split_leaf(a, leaf, rng, min_room, door, margin):
    r0, c0, r1, c1 = leaf
    h, w = r1 - r0, c1 - c0
    axes = ["v", "h"] if w >= h else ["h", "v"]
    for axis in axes:
        span = w if axis == "v" else h
        if span < 2 * min_room + 1:
            continue
        positions = np.arange(min_room, span - min_room)
        rng.shuffle(positions)
        for p in positions[:40]:
            if axis == "v":
                c = c0 + int(p)
                ends = (a[r0 - 1, c - margin:c + margin + 1], a[r1, c - margin:c + margin + 1])
                if any(np.any(e != OCCUPIED) for e in ends) or h < door + 2:
                    continue
                a[r0:r1, c] = OCCUPIED
                d0 = int(rng.integers(r0 + 1, r1 - door))
                a[d0:d0 + door, c] = FREE
                return [(r0, c0, r1, c), (r0, c + 1, r1, c1)]
            r = r0 + int(p)
            ends = (a[r - margin:r + margin + 1, c0 - 1], a[r - margin:r + margin + 1, c1])
            if any(np.any(e != OCCUPIED) for e in ends) or w < door + 2:
                continue
            a[r, c0:c1] = OCCUPIED
            d0 = int(rng.integers(c0 + 1, c1 - door))
            a[r, d0:d0 + door] = FREE
            return [(r0, c0, r, c1), (r + 1, c0, r1, c1)]
    return None


def _carve_door(a, line, lo, hi, axis, door):
    """Open ``door`` cells of a shared wall where both sides are free."""
    if axis == "v":
        ok = (a[lo:hi, line - 1] == FREE) & (a[lo:hi, line + 1] == FREE)
    else:
        ok = (a[line - 1, lo:hi] == FREE) & (a[line + 1, lo:hi] == FREE)
    n = len(ok)
    for width in (door, MIN_PASSAGE_CELLS):
        starts = [s for s in range(n - width + 1) if ok[s:s + width].all()]
        if starts:
            mid = (n - width) / 2
            s = min(starts, key=lambda v: (abs(v - mid), v)) + lo
            if axis == "v":
                a[s:s + width, line] = FREE
            else:
                a[line, s:s + width] = FREE
            return [s, s + width]
    return None


_ELEMENTS = {
    GenKind.LOOP: _loop,
    GenKind.CORRIDOR: _corridor,
    GenKind.CORNER: _corner,
    GenKind.ROOMS: _rooms,
}


def _combination(extent, rng, params, res):
    elements = params.get("elements") or ["loop", "corridor"]
    if isinstance(elements, str):
        elements = elements.split(",")
    try:
        kinds = [GenKind(e.strip()) for e in elements]
    except ValueError as exc:
        raise UnknownName(str(exc)) from None
    if GenKind.COMBINATION in kinds:
        raise InfeasibleSpec("combinations cannot nest")
    k = len(kinds)
    cols = math.ceil(math.sqrt(k))
    rows = math.ceil(k / cols)
    H, W = _dims(extent, res)
    sh = (H + rows - 1) // rows
    sw = (W + cols - 1) // cols
    H, W = rows * (sh - 1) + 1, cols * (sw - 1) + 1
    a = np.full((H, W), OCCUPIED, dtype=np.int8)
    slot_extent = (sw * res, sh * res)
    slots = []
    for i, kind in enumerate(kinds):
        r, c = divmod(i, cols)
        if r % 2:
            c = cols - 1 - c          # serpentine so consecutive slots share a wall
        sub_params = dict(params.get(kind.value, {}))
        sub, _ = _ELEMENTS[kind](slot_extent, rng, sub_params, res)
        R, C = r * (sh - 1), c * (sw - 1)
        # later elements are carved into earlier ones on the shared wall
        a[R:R + sh, C:C + sw] = sub
        slots.append((kind.value, R, C))
    # restore slot borders, then open doors between consecutive slots
    for _, R, C in slots:
        a[R, C:C + sw] = OCCUPIED
        a[R + sh - 1, C:C + sw] = OCCUPIED
        a[R:R + sh, C] = OCCUPIED
        a[R:R + sh, C + sw - 1] = OCCUPIED
    door = _cells(params.get("door_width", 1.5), res)
    doors = []
    for (_, R0, C0), (_, R1, C1) in zip(slots, slots[1:]):
        if R0 == R1:
            line = max(C0, C1)
            d = _carve_door(a, line, R0 + 1, R0 + sh - 1, "v", door)
        else:
            line = max(R0, R1)
            d = _carve_door(a, line, C0 + 1, C0 + sw - 1, "h", door)
        if d is None:
            raise InfeasibleSpec("no room for a door between lattice slots")
        doors.append(d)
    return a, {"elements": [k.value for k in kinds], "lattice": [rows, cols],
               "slots": [[s[1], s[2]] for s in slots], "doors": doors}


_GENERATORS = dict(_ELEMENTS)
_GENERATORS[GenKind.COMBINATION] = _combination


# -- spawns -----------------------------------------------------------------

def place_spawns(cells: np.ndarray, n: int, mode: str, rng: np.random.Generator,
                 resolution: float = DEFAULT_RESOLUTION, clearance: float = 0.3) -> list[tuple[int, int]]:
    """Choose ``n`` distinct free spawn cells.

    The first cell is drawn from ``rng`` among cells with ``clearance`` meters
    to the nearest wall. ``far`` then repeatedly adds the cell whose BFS
    distance to the chosen set is largest; ``close`` draws the others within
    1 m of the first.
    """
    if mode not in ("far", "close"):
        raise ValueError(f"unknown spawn mode {mode!r}")
    free = cells == FREE
    clear = ndimage.distance_transform_cdt(free, metric="chessboard") > _cells(clearance, resolution)
    if not clear.any():
        clear = free
    cand = np.flatnonzero(clear)
    if len(cand) < n:
        raise InfeasibleSpec(f"only {len(cand)} spawnable cells for {n} robots")
    W = cells.shape[1]
    anchor = int(cand[rng.integers(len(cand))])
    chosen = [anchor]
    if mode == "far":
        nearest = None
        for _ in range(1, n):
            d = _kernels.bfs_distance(free, *divmod(chosen[-1], W)).ravel().astype(np.int64)
            d[d < 0] = -1
            nearest = d if nearest is None else np.minimum(nearest, d)
            score = np.where(clear.ravel(), nearest, -1)
            score[chosen] = -1
            chosen.append(int(np.argmax(score)))
    else:
        ar, ac = divmod(anchor, W)
        rad = _cells(CLOSE_SPAWN_RADIUS_M, resolution)
        d = _kernels.bfs_distance(free, ar, ac)
        rr, cc = np.divmod(cand, W)
        near = cand[((rr - ar) ** 2 + (cc - ac) ** 2 <= rad * rad) & (d.ravel()[cand] > 0)]
        if len(near) < n - 1:
            raise InfeasibleSpec("not enough free cells for a close spawn")
        pick = rng.choice(len(near), size=n - 1, replace=False)
        chosen.extend(int(near[i]) for i in sorted(pick))
    return [tuple(map(int, divmod(i, W))) for i in chosen]


def _finish(cells, name, params, rng, res, n_spawns=2):
    grid = OccupancyGrid(cells, res)
    spawns = [cell_to_world(c, grid) for c in place_spawns(cells, n_spawns, "far", rng, res)]
    sc = Scenario(grid, spawns, name, params)
    problems = sc.validate()
    if problems:
        raise InfeasibleSpec(f"{name}: " + "; ".join(problems))
    return sc


def generate(spec: GenSpec) -> Scenario:
    """Build a scenario from ``spec``; a pure function of the spec and its seed.

    Raises:
        InfeasibleSpec: the requested geometry cannot be realised.
    """
    rng = np.random.default_rng(spec.seed)
    cells, meta = _GENERATORS[spec.kind](spec.extent, rng, spec.params, spec.resolution)
    params = spec.as_dict()
    params["layout"] = meta
    return _finish(cells, f"{spec.kind.value}-{spec.seed}", params, rng, spec.resolution)


def batch_generate(template: GenSpec, n: int, base_seed: int = 0) -> list[Scenario]:
    """Generate ``n`` scenarios with seeds ``base_seed .. base_seed + n - 1``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    out = []
    for i in range(n):
        spec = GenSpec(template.kind, template.extent, base_seed + i, dict(template.params),
                       template.resolution)
        try:
            out.append(generate(spec))
        except InfeasibleSpec as exc:
            raise InfeasibleSpec(str(exc), index=i) from None
    return out


# -- built-ins --------------------------------------------------------------

def _builtin_room(res):
    """Five 6x6 m rooms, three above and two below a 2 m hallway."""
    room, wall, hall, door = _cells(6.0, res), 1, _cells(2.0, res), _cells(1.0, res)
    W = 3 * room + 4 * wall
    H = 2 * room + hall + 4 * wall
    a = np.full((H, W), OCCUPIED, dtype=np.int8)
    top = wall
    hall0 = top + room + wall
    bottom = hall0 + hall + wall
    a[hall0:hall0 + hall, wall:W - wall] = FREE
    rooms = []
    for i in range(3):
        c = wall + i * (room + wall)
        rooms.append([top, c, top + room, c + room])
    offset = (W - (2 * room + wall)) // 2
    for i in range(2):
        c = offset + i * (room + wall)
        rooms.append([bottom, c, bottom + room, c + room])
    for r0, c0, r1, c1 in rooms:
        a[r0:r1, c0:c1] = FREE
        d0 = (c0 + c1 - door) // 2
        door_row = r1 if r0 == top else r0 - 1
        a[door_row, d0:d0 + door] = FREE
    return a, {"rooms": rooms}


def _builtin_comb2(res, rng):
    """Four 8x8 m rooms around a hallway cross, each cluttered with corners."""
    room, hall, door = _cells(8.0, res), _cells(2.0, res), _cells(1.0, res)
    n = 2 * room + hall + 4
    a = np.full((n, n), OCCUPIED, dtype=np.int8)
    h0 = 1 + room + 1
    a[h0:h0 + hall, 1:n - 1] = FREE
    a[1:n - 1, h0:h0 + hall] = FREE
    rooms = []
    for r0 in (1, h0 + hall + 1):
        for c0 in (1, h0 + hall + 1):
            rooms.append([r0, c0, r0 + room, c0 + room])
            a[r0:r0 + room, c0:c0 + room] = FREE
    for r0, c0, r1, c1 in rooms:
        d0 = (c0 + c1 - door) // 2
        row = r1 if r0 == 1 else r0 - 1
        a[row, d0:d0 + door] = FREE
        e0 = (r0 + r1 - door) // 2
        col = c1 if c0 == 1 else c0 - 1
        a[e0:e0 + door, col] = FREE
    corners = []
    for region in rooms:
        corners += _add_corners(a, rng, 4, res, region=tuple(region), min_size=1.0, max_size=2.5)
    return a, {"rooms": rooms, "corners": corners}


BUILTIN_NAMES = ("loop", "corridor", "corner", "room", "comb1", "comb2")


def builtin(name: str, resolution: float = DEFAULT_RESOLUTION) -> Scenario:
    """One of the six fixed evaluation scenarios."""
    rng = np.random.default_rng(BUILTIN_NAMES.index(name) if name in BUILTIN_NAMES else 0)
    res = resolution
    if name == "loop":
        cells, meta = _loop((20.0, 20.0), rng, {"loop_width": 3.0, "jitter": 0.0}, res)
    elif name == "corridor":
        # two 7x20 m spaces and a 6 m corridor, inside a one-cell boundary ring
        ring = 2 * res
        cells, meta = _corridor((20.0 + ring, 20.0 + ring), rng,
                                {"corridor_width": 1.5, "corridor_length": 6.0, "jitter": False}, res)
    elif name == "corner":
        cells, meta = _corner((20.0, 20.0), rng, {"n_corners": 14}, res)
    elif name == "room":
        cells, meta = _builtin_room(res)
    elif name == "comb1":
        cells, meta = _loop((20.0, 20.0), rng, {"loop_width": 4.0, "jitter": 0.0, "narrow_sides": 4,
                                                "narrow_width": 1.0, "narrow_length": 4.0}, res)
    elif name == "comb2":
        cells, meta = _builtin_comb2(res, rng)
    else:
        raise UnknownName(f"unknown builtin scenario {name!r}; choose from {', '.join(BUILTIN_NAMES)}")
    params = {"kind": "builtin", "name": name, "seed": 0, "resolution": res, "layout": meta}
    return _finish(cells, name, params, np.random.default_rng(0), res)
