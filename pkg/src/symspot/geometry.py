"""Geometry of the primitive kinds found in 2D vector drawings.

All angles are radians, counterclockwise. Geometry encodings (flat tuples):

- ``segment``:       ``(x1, y1, x2, y2)``
- ``circle``:        ``(cx, cy, r)``
- ``arc``:           ``(cx, cy, r, theta0, theta1)`` swept CCW from theta0
- ``ellipse``:       ``(cx, cy, rx, ry, rot)``
- ``polyline-edge``: ``(x1, y1, x2, y2)`` one edge of a decomposed polyline

A full-turn arc is rejected (use ``circle``); the sweep of an arc is
``(theta1 - theta0) mod 2*pi`` and must be positive.
"""

from __future__ import annotations

import math

from scipy.special import ellipe

SEGMENT = "segment"
ARC = "arc"
CIRCLE = "circle"
ELLIPSE = "ellipse"
POLYLINE_EDGE = "polyline-edge"

#: Kinds a point set is made of (polylines are decomposed before this stage).
POINT_KINDS = (SEGMENT, ARC, CIRCLE, ELLIPSE, POLYLINE_EDGE)

_GEOMETRY_ARITY = {SEGMENT: 4, ARC: 5, CIRCLE: 3, ELLIPSE: 5, POLYLINE_EDGE: 4}

TWO_PI = 2.0 * math.pi


class GeometryError(ValueError):
    """Raised for malformed or degenerate primitive geometry."""


def validate_geometry(kind: str, geometry: tuple[float, ...]) -> None:
    """Reject unknown kinds, wrong arity, non-finite or degenerate geometry."""
    if kind not in _GEOMETRY_ARITY:
        raise GeometryError(f"unknown primitive kind {kind!r}")
    if len(geometry) != _GEOMETRY_ARITY[kind]:
        raise GeometryError(
            f"{kind} geometry needs {_GEOMETRY_ARITY[kind]} numbers, got {len(geometry)}"
        )
    if not all(math.isfinite(v) for v in geometry):
        raise GeometryError(f"{kind} geometry contains non-finite values: {geometry}")
    if kind in (SEGMENT, POLYLINE_EDGE):
        x1, y1, x2, y2 = geometry
        if x1 == x2 and y1 == y2:
            raise GeometryError(f"zero-length {kind}: {geometry}")
    elif kind == CIRCLE:
        if geometry[2] <= 0.0:
            raise GeometryError(f"circle radius must be positive: {geometry}")
    elif kind == ARC:
        if geometry[2] <= 0.0:
            raise GeometryError(f"arc radius must be positive: {geometry}")
        if arc_sweep(geometry[3], geometry[4]) <= 0.0:
            raise GeometryError(
                f"arc sweep is zero (full circles use the circle kind): {geometry}"
            )
    elif kind == ELLIPSE:
        if geometry[2] <= 0.0 or geometry[3] <= 0.0:
            raise GeometryError(f"ellipse semi-axes must be positive: {geometry}")


def arc_sweep(theta0: float, theta1: float) -> float:
    """CCW sweep of an arc in (0, 2*pi); exactly 0 only for theta1 == theta0 mod 2*pi."""
    return (theta1 - theta0) % TWO_PI


def arc_length(kind: str, geometry: tuple[float, ...]) -> float:
    """Exact length of a primitive (ellipses via the complete elliptic integral)."""
    if kind in (SEGMENT, POLYLINE_EDGE):
        x1, y1, x2, y2 = geometry
        return math.hypot(x2 - x1, y2 - y1)
    if kind == CIRCLE:
        return TWO_PI * geometry[2]
    if kind == ARC:
        return geometry[2] * arc_sweep(geometry[3], geometry[4])
    if kind == ELLIPSE:
        rx, ry = geometry[2], geometry[3]
        a, b = max(rx, ry), min(rx, ry)
        # Perimeter = 4 a E(m), m = 1 - (b/a)^2.
        return float(4.0 * a * ellipe(1.0 - (b / a) ** 2))
    raise GeometryError(f"unknown primitive kind {kind!r}")


def midpoint(kind: str, geometry: tuple[float, ...]) -> tuple[float, float]:
    """Representative point: parameter midpoint for open curves, center for closed."""
    if kind in (SEGMENT, POLYLINE_EDGE):
        x1, y1, x2, y2 = geometry
        return (0.5 * (x1 + x2), 0.5 * (y1 + y2))
    if kind in (CIRCLE, ELLIPSE):
        return (geometry[0], geometry[1])
    if kind == ARC:
        cx, cy, r, theta0, theta1 = geometry
        mid = theta0 + 0.5 * arc_sweep(theta0, theta1)
        return (cx + r * math.cos(mid), cy + r * math.sin(mid))
    raise GeometryError(f"unknown primitive kind {kind!r}")


def reference_tangent(kind: str, geometry: tuple[float, ...]) -> tuple[float, float]:
    """Unit tangent at the representative point (circle: +y; ellipse: at rot+90deg)."""
    if kind in (SEGMENT, POLYLINE_EDGE):
        x1, y1, x2, y2 = geometry
        n = math.hypot(x2 - x1, y2 - y1)
        return ((x2 - x1) / n, (y2 - y1) / n)
    if kind == ARC:
        theta0, theta1 = geometry[3], geometry[4]
        mid = theta0 + 0.5 * arc_sweep(theta0, theta1)
        return (-math.sin(mid), math.cos(mid))
    if kind == CIRCLE:
        return (0.0, 1.0)
    if kind == ELLIPSE:
        rot = geometry[4]
        return (-math.sin(rot), math.cos(rot))
    raise GeometryError(f"unknown primitive kind {kind!r}")


def curvature_proxy(kind: str, geometry: tuple[float, ...]) -> float:
    """Scale-squashed curvature in [0, 1): 0 for straight kinds, 1/(1+r) otherwise."""
    if kind in (SEGMENT, POLYLINE_EDGE):
        return 0.0
    if kind in (CIRCLE, ARC):
        return 1.0 / (1.0 + geometry[2])
    if kind == ELLIPSE:
        return 1.0 / (1.0 + 0.5 * (geometry[2] + geometry[3]))
    raise GeometryError(f"unknown primitive kind {kind!r}")


def _angle_in_sweep(angle: float, theta0: float, sweep: float) -> bool:
    return (angle - theta0) % TWO_PI <= sweep


def bounding_box(kind: str, geometry: tuple[float, ...]) -> tuple[float, float, float, float]:
    """Tight axis-aligned box (xmin, ymin, xmax, ymax) of the primitive."""
    if kind in (SEGMENT, POLYLINE_EDGE):
        x1, y1, x2, y2 = geometry
        return (min(x1, x2), min(y1, y2), max(x1, x2), max(y1, y2))
    if kind == CIRCLE:
        cx, cy, r = geometry
        return (cx - r, cy - r, cx + r, cy + r)
    if kind == ELLIPSE:
        cx, cy, rx, ry, rot = geometry
        # Extents of a rotated ellipse along the axes.
        hw = math.hypot(rx * math.cos(rot), ry * math.sin(rot))
        hh = math.hypot(rx * math.sin(rot), ry * math.cos(rot))
        return (cx - hw, cy - hh, cx + hw, cy + hh)
    if kind == ARC:
        cx, cy, r, theta0, theta1 = geometry
        sweep = arc_sweep(theta0, theta1)
        xs = [cx + r * math.cos(theta0), cx + r * math.cos(theta0 + sweep)]
        ys = [cy + r * math.sin(theta0), cy + r * math.sin(theta0 + sweep)]
        # Axis extremes reached only if the corresponding quadrant angle is swept.
        for k, extreme in enumerate((0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi)):
            if _angle_in_sweep(extreme, theta0, sweep):
                if k % 2 == 0:
                    xs.append(cx + (r if k == 0 else -r))
                else:
                    ys.append(cy + (r if k == 1 else -r))
        return (min(xs), min(ys), max(xs), max(ys))
    raise GeometryError(f"unknown primitive kind {kind!r}")
