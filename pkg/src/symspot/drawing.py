"""Core types: primitives, point samples, drawings, layer grouping.

A drawing is a flat list of graphical primitives, each tagged with a layer id
and ground-truth ``(semantic, instance)``. For learning, every primitive is
collapsed to a single point sample: a 2D position plus a 6-component feature

    f = [cos(theta), sin(theta), squashed length, kind code,
         curvature proxy, layer density]

where theta is the reference tangent angle, squashed length is
``log1p(L) / (1 + log1p(L))``, the kind code enumerates the five kinds on a
[0, 1] grid, curvature is ``1/(1+r)`` for curved kinds, and layer density is
the fraction of the drawing's primitives sharing the sample's layer.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo

#: Stuff primitives and unassigned predictions carry this instance id.
STUFF_INSTANCE = -1

KIND_CODES = {
    geo.SEGMENT: 0.0,
    geo.ARC: 0.25,
    geo.CIRCLE: 0.5,
    geo.ELLIPSE: 0.75,
    geo.POLYLINE_EDGE: 1.0,
}

FEATURE_DIM = 6


@dataclass(frozen=True)
class ClassDef:
    """One vocabulary entry; ``is_thing`` selects countable-instance semantics."""

    id: int
    name: str
    is_thing: bool


@dataclass(frozen=True)
class GraphicalPrimitive:
    """A single vector entity with layer id and ground-truth assignment.

    ``instance`` is ``STUFF_INSTANCE`` (-1) for stuff classes and a
    non-negative id (unique per drawing, not necessarily contiguous) for
    things.
    """

    kind: str
    geometry: tuple[float, ...]
    layer: int
    semantic: int
    instance: int = STUFF_INSTANCE

    def __post_init__(self) -> None:
        object.__setattr__(self, "geometry", tuple(float(v) for v in self.geometry))
        geo.validate_geometry(self.kind, self.geometry)
        if self.layer < 0:
            raise ValueError(f"layer id must be >= 0, got {self.layer}")
        if self.semantic < 0:
            raise ValueError(f"semantic label must be >= 0, got {self.semantic}")
        if self.instance < STUFF_INSTANCE:
            raise ValueError(f"instance id must be >= -1, got {self.instance}")

    @property
    def length(self) -> float:
        return geo.arc_length(self.kind, self.geometry)

    def bbox(self) -> tuple[float, float, float, float]:
        return geo.bounding_box(self.kind, self.geometry)


def decompose_polyline(
    points: list[tuple[float, float]], layer: int, semantic: int, instance: int
) -> list[GraphicalPrimitive]:
    """Split a polyline (>=2 vertices) into per-edge primitives."""
    if len(points) < 2:
        raise geo.GeometryError(f"polyline needs >= 2 vertices, got {len(points)}")
    edges = []
    for (x1, y1), (x2, y2) in zip(points[:-1], points[1:]):
        edges.append(
            GraphicalPrimitive(
                kind=geo.POLYLINE_EDGE,
                geometry=(x1, y1, x2, y2),
                layer=layer,
                semantic=semantic,
                instance=instance,
            )
        )
    return edges


@dataclass(frozen=True)
class PointSample:
    """A primitive collapsed to one point: position, feature, layer, length."""

    position: tuple[float, float]
    feature: tuple[float, ...]
    layer_id: int
    length: float

    def __post_init__(self) -> None:
        if len(self.feature) != FEATURE_DIM:
            raise ValueError(f"feature must have {FEATURE_DIM} components")
        if not all(math.isfinite(v) for v in self.feature):
            raise ValueError(f"non-finite feature: {self.feature}")
        if not (math.isfinite(self.length) and self.length > 0.0):
            raise ValueError(f"length must be positive and finite, got {self.length}")


def primitive_to_point(prim: GraphicalPrimitive, layer_density: float = 0.0) -> PointSample:
    """Collapse one primitive to a point sample.

    ``layer_density`` is a drawing-level statistic, so it is injected by the
    caller (0.0 when converting a primitive in isolation).
    """
    tx, ty = geo.reference_tangent(prim.kind, prim.geometry)
    length = geo.arc_length(prim.kind, prim.geometry)
    log_len = math.log1p(length)
    feature = (
        tx,
        ty,
        log_len / (1.0 + log_len),
        KIND_CODES[prim.kind],
        geo.curvature_proxy(prim.kind, prim.geometry),
        float(layer_density),
    )
    return PointSample(
        position=geo.midpoint(prim.kind, prim.geometry),
        feature=feature,
        layer_id=prim.layer,
        length=length,
    )


def group_by_layer(layer_ids: np.ndarray) -> dict[int, np.ndarray]:
    """Partition row indices by layer id (keys sorted ascending).

    The index arrays are disjoint, each sorted ascending, and their union is
    ``arange(len(layer_ids))``.
    """
    ids = np.asarray(layer_ids)
    return {int(l): np.flatnonzero(ids == l) for l in np.unique(ids)}


@dataclass(frozen=True)
class Drawing:
    """A vector drawing with its derived point set.

    ``primitives[i]`` and ``samples[i]`` are aligned 1:1; polylines are
    decomposed into edges before a ``Drawing`` exists. Construct via
    :meth:`build`, which fills in the density feature component.
    """

    id: str
    width: float
    height: float
    num_layers: int
    class_vocab: tuple[ClassDef, ...]
    primitives: tuple[GraphicalPrimitive, ...]
    samples: tuple[PointSample, ...] = field(repr=False)

    @classmethod
    def build(
        cls,
        id: str,
        width: float,
        height: float,
        num_layers: int,
        class_vocab: tuple[ClassDef, ...] | list[ClassDef],
        primitives: list[GraphicalPrimitive] | tuple[GraphicalPrimitive, ...],
    ) -> "Drawing":
        vocab = tuple(class_vocab)
        validate_vocab(vocab)
        if width <= 0 or height <= 0:
            raise ValueError(f"drawing extent must be positive, got {width}x{height}")
        if num_layers < 1:
            raise ValueError(f"num_layers must be >= 1, got {num_layers}")
        prims = tuple(primitives)
        is_thing = {c.id: c.is_thing for c in vocab}
        for i, p in enumerate(prims):
            if p.layer >= num_layers:
                raise ValueError(f"primitive {i}: layer {p.layer} >= num_layers {num_layers}")
            if p.semantic not in is_thing:
                raise ValueError(f"primitive {i}: semantic {p.semantic} not in vocabulary")
            if is_thing[p.semantic] and p.instance < 0:
                raise ValueError(
                    f"primitive {i}: thing class {p.semantic} needs an instance id >= 0"
                )
            if not is_thing[p.semantic] and p.instance != STUFF_INSTANCE:
                raise ValueError(
                    f"primitive {i}: stuff class {p.semantic} carries instance id {p.instance}"
                )
        counts: dict[int, int] = {}
        for p in prims:
            counts[p.layer] = counts.get(p.layer, 0) + 1
        n = len(prims)
        samples = tuple(
            primitive_to_point(p, layer_density=counts[p.layer] / n) for p in prims
        )
        return cls(
            id=id,
            width=float(width),
            height=float(height),
            num_layers=num_layers,
            class_vocab=vocab,
            primitives=prims,
            samples=samples,
        )

    def __len__(self) -> int:
        return len(self.primitives)

    @property
    def num_classes(self) -> int:
        return len(self.class_vocab)

    def thing_ids(self) -> frozenset[int]:
        return frozenset(c.id for c in self.class_vocab if c.is_thing)

    # Dense array views (small drawings; recomputed on demand).

    def positions(self) -> np.ndarray:
        return np.array([s.position for s in self.samples], dtype=np.float64).reshape(-1, 2)

    def normalized_positions(self) -> np.ndarray:
        pos = self.positions()
        return pos / np.array([self.width, self.height], dtype=np.float64)

    def features(self) -> np.ndarray:
        return np.array([s.feature for s in self.samples], dtype=np.float64).reshape(
            -1, FEATURE_DIM
        )

    def layer_ids(self) -> np.ndarray:
        return np.array([s.layer_id for s in self.samples], dtype=np.int64)

    def lengths(self) -> np.ndarray:
        return np.array([s.length for s in self.samples], dtype=np.float64)

    def semantics(self) -> np.ndarray:
        return np.array([p.semantic for p in self.primitives], dtype=np.int64)

    def instances(self) -> np.ndarray:
        return np.array([p.instance for p in self.primitives], dtype=np.int64)

    def primitive_boxes(self) -> np.ndarray:
        return np.array([p.bbox() for p in self.primitives], dtype=np.float64).reshape(-1, 4)


def validate_vocab(vocab: tuple[ClassDef, ...]) -> None:
    """Vocabulary ids must be exactly 0..C-1 in order."""
    if len(vocab) == 0:
        raise ValueError("class vocabulary is empty")
    for i, c in enumerate(vocab):
        if c.id != i:
            raise ValueError(f"class ids must be contiguous from 0; entry {i} has id {c.id}")
