"""Seeded synthetic floorplan generator.

Drawings are grids of rooms. Each room contributes four wall segments (stuff)
plus thing symbols: doors (quarter-circle swing arc + leaf segment), windows
and blinds (two parallel segments flush with a wall), and tables (polyline
rectangle with a circle or ellipse centerpiece). Windows and blinds are
geometrically identical and placed from the same distribution; they differ
only by layer, so class-separating them requires layer information.

Default layer scheme: one layer per category (wall, door, window, blind,
table), folded by ``num_layers`` when fewer layers are requested.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .drawing import ClassDef, Drawing, GraphicalPrimitive, decompose_polyline

DEFAULT_VOCAB = (
    ClassDef(0, "wall", False),
    ClassDef(1, "door", True),
    ClassDef(2, "window", True),
    ClassDef(3, "blind", True),
    ClassDef(4, "table", True),
)

_CATEGORY_LAYER = {"wall": 0, "door": 1, "window": 2, "blind": 3, "table": 4}
_WALL, _DOOR, _WINDOW, _BLIND, _TABLE = 0, 1, 2, 3, 4

# (side, fraction along the side): sampled without replacement per room.
_WALL_SLOTS = [(side, t) for side in range(4) for t in (0.25, 0.5, 0.75)]


@dataclass(frozen=True)
class GeneratorSpec:
    rooms: int = 4
    doors_per_room: int = 1
    windows_per_room: int = 1
    blinds_per_room: int = 1
    tables_per_room: int = 1
    num_layers: int = 5
    width: float = 100.0
    height: float = 100.0

    def validate(self) -> None:
        if self.rooms < 1:
            raise ValueError(f"rooms must be >= 1, got {self.rooms}")
        for name in ("doors_per_room", "windows_per_room", "blinds_per_room", "tables_per_room"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        wall_mounted = self.doors_per_room + self.windows_per_room + self.blinds_per_room
        if wall_mounted > len(_WALL_SLOTS):
            raise ValueError(
                f"at most {len(_WALL_SLOTS)} wall-mounted symbols per room, got {wall_mounted}"
            )
        if self.num_layers < 1:
            raise ValueError(f"num_layers must be >= 1, got {self.num_layers}")
        if self.width <= 0 or self.height <= 0:
            raise ValueError("drawing extent must be positive")


def _layer(category: str, num_layers: int) -> int:
    return _CATEGORY_LAYER[category] % num_layers


def _side_point(room: tuple[float, float, float, float], side: int, t: float) -> tuple[float, float]:
    x0, y0, x1, y1 = room
    if side == 0:
        return (x0 + t * (x1 - x0), y0)
    if side == 1:
        return (x1, y0 + t * (y1 - y0))
    if side == 2:
        return (x0 + t * (x1 - x0), y1)
    return (x0, y0 + t * (y1 - y0))


def _side_axes(side: int) -> tuple[tuple[float, float], tuple[float, float]]:
    """(unit vector along the wall, unit normal pointing into the room)."""
    along = [(1.0, 0.0), (0.0, 1.0), (1.0, 0.0), (0.0, 1.0)][side]
    inward = [(0.0, 1.0), (-1.0, 0.0), (0.0, -1.0), (1.0, 0.0)][side]
    return along, inward


def _door(room, side, t, rng, layer, instance) -> list[GraphicalPrimitive]:
    x0, y0, x1, y1 = room
    hx, hy = _side_point(room, side, t)
    leaf = 0.22 * min(x1 - x0, y1 - y0) * (0.8 + 0.4 * rng.random())
    (ax, ay), (nx, ny) = _side_axes(side)
    # Quarter swing from the wall direction to the inward normal.
    theta0 = math.atan2(ay, ax)
    theta1 = math.atan2(ny, nx)
    if (theta1 - theta0) % (2 * math.pi) > math.pi:  # keep the 90-degree sweep CCW
        theta0, theta1 = theta1, theta0
    common = dict(layer=layer, semantic=_DOOR, instance=instance)
    return [
        GraphicalPrimitive("arc", (hx, hy, leaf, theta0, theta1), **common),
        GraphicalPrimitive("segment", (hx, hy, hx + leaf * nx, hy + leaf * ny), **common),
    ]


def _wall_pair(room, side, t, rng, layer, semantic, instance) -> list[GraphicalPrimitive]:
    """Two parallel segments flush with a wall (windows and blinds alike)."""
    x0, y0, x1, y1 = room
    cx, cy = _side_point(room, side, t)
    (ax, ay), (nx, ny) = _side_axes(side)
    side_len = (x1 - x0) if side in (0, 2) else (y1 - y0)
    half = 0.5 * 0.18 * side_len * (0.8 + 0.4 * rng.random())
    gap = 0.012 * min(x1 - x0, y1 - y0)
    prims = []
    for s in (-1.0, 1.0):
        ox, oy = cx + s * gap * nx, cy + s * gap * ny
        prims.append(
            GraphicalPrimitive(
                "segment",
                (ox - half * ax, oy - half * ay, ox + half * ax, oy + half * ay),
                layer=layer,
                semantic=semantic,
                instance=instance,
            )
        )
    return prims


def _table(room, rng, layer, instance, round_top: bool) -> list[GraphicalPrimitive]:
    x0, y0, x1, y1 = room
    w, h = x1 - x0, y1 - y0
    cx = x0 + w * (0.3 + 0.4 * rng.random())
    cy = y0 + h * (0.3 + 0.4 * rng.random())
    a = w * (0.08 + 0.06 * rng.random())
    b = h * (0.08 + 0.06 * rng.random())
    ring = [
        (cx - a, cy - b),
        (cx + a, cy - b),
        (cx + a, cy + b),
        (cx - a, cy + b),
        (cx - a, cy - b),
    ]
    prims = decompose_polyline(ring, layer=layer, semantic=_TABLE, instance=instance)
    if round_top:
        prims.append(
            GraphicalPrimitive(
                "circle", (cx, cy, 0.5 * min(a, b)), layer=layer, semantic=_TABLE,
                instance=instance,
            )
        )
    else:
        prims.append(
            GraphicalPrimitive(
                "ellipse",
                (cx, cy, 0.6 * a, 0.45 * b, rng.random() * math.pi),
                layer=layer,
                semantic=_TABLE,
                instance=instance,
            )
        )
    return prims


def generate_synthetic(seed: int | list[int], spec: GeneratorSpec = GeneratorSpec(),
                       drawing_id: str | None = None) -> Drawing:
    """Generate one drawing; identical (seed, spec) gives identical output."""
    spec.validate()
    rng = np.random.default_rng(seed)
    grid = math.ceil(math.sqrt(spec.rooms))
    cw, ch = spec.width / grid, spec.height / grid

    prims: list[GraphicalPrimitive] = []
    instance = 0
    wall_layer = _layer("wall", spec.num_layers)
    for k in range(spec.rooms):
        col, row = k % grid, k // grid
        mx = cw * (0.06 + 0.05 * rng.random(2))
        my = ch * (0.06 + 0.05 * rng.random(2))
        x0, x1 = col * cw + mx[0], (col + 1) * cw - mx[1]
        y0, y1 = row * ch + my[0], (row + 1) * ch - my[1]
        room = (x0, y0, x1, y1)
        corners = [(x0, y0), (x1, y0), (x1, y1), (x0, y1)]
        for (px, py), (qx, qy) in zip(corners, corners[1:] + corners[:1]):
            prims.append(
                GraphicalPrimitive(
                    "segment", (px, py, qx, qy), layer=wall_layer, semantic=_WALL
                )
            )

        n_mounted = spec.doors_per_room + spec.windows_per_room + spec.blinds_per_room
        slot_idx = rng.choice(len(_WALL_SLOTS), size=n_mounted, replace=False)
        slots = [_WALL_SLOTS[i] for i in slot_idx]
        for _ in range(spec.doors_per_room):
            side, t = slots.pop()
            t += rng.uniform(-0.04, 0.04)
            prims.extend(_door(room, side, t, rng, _layer("door", spec.num_layers), instance))
            instance += 1
        for semantic, category, count in (
            (_WINDOW, "window", spec.windows_per_room),
            (_BLIND, "blind", spec.blinds_per_room),
        ):
            for _ in range(count):
                side, t = slots.pop()
                t += rng.uniform(-0.04, 0.04)
                prims.extend(
                    _wall_pair(room, side, t, rng, _layer(category, spec.num_layers),
                               semantic, instance)
                )
                instance += 1
        for j in range(spec.tables_per_room):
            prims.extend(
                _table(room, rng, _layer("table", spec.num_layers), instance,
                       round_top=bool((k + j) % 2))
            )
            instance += 1

    if drawing_id is None:
        drawing_id = f"syn-{seed}" if isinstance(seed, int) else "syn-" + "-".join(map(str, seed))
    return Drawing.build(
        id=drawing_id,
        width=spec.width,
        height=spec.height,
        num_layers=spec.num_layers,
        class_vocab=DEFAULT_VOCAB,
        primitives=prims,
    )


def generate_dataset(seed: int, count: int, spec: GeneratorSpec = GeneratorSpec()) -> list[Drawing]:
    """Generate ``count`` drawings with per-drawing derived seeds."""
    if count < 1:
        raise ValueError(f"count must be >= 1, got {count}")
    return [
        generate_synthetic([seed, i], spec, drawing_id=f"syn-{seed}-{i}")
        for i in range(count)
    ]
