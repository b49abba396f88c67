"""JSON dataset serialization.

File layout::

    {
      "class_vocab": [{"id": 0, "name": "wall", "is_thing": false}, ...],
      "drawings": [
        {
          "id": "d0", "width": 100.0, "height": 100.0, "num_layers": 3,
          "primitives": [
            {"kind": "segment", "geometry": [x1, y1, x2, y2],
             "layer": 0, "semantic": 0, "instance": -1},
            ...
          ]
        },
        ...
      ]
    }

Geometry by kind: ``segment``/``polyline-edge`` ``[x1,y1,x2,y2]``, ``circle``
``[cx,cy,r]``, ``arc`` ``[cx,cy,r,theta0,theta1]`` (radians, CCW), ``ellipse``
``[cx,cy,rx,ry,rot]``, ``polyline`` ``[[x,y], ...]``. Polylines are decomposed
into ``polyline-edge`` rows at load time, so saving always emits the
decomposed form and ``load(save(d)) == d`` field-for-field.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Sequence

from .drawing import ClassDef, Drawing, GraphicalPrimitive, decompose_polyline
from .geometry import GeometryError


class DatasetError(ValueError):
    """Raised when a dataset file violates the schema."""


def _require(record: dict, key: str, where: str) -> Any:
    if key not in record:
        raise DatasetError(f"{where}: missing field {key!r}")
    return record[key]


def parse_vocab(raw: list[dict]) -> tuple[ClassDef, ...]:
    vocab = []
    for i, entry in enumerate(raw):
        where = f"class_vocab[{i}]"
        vocab.append(
            ClassDef(
                id=int(_require(entry, "id", where)),
                name=str(_require(entry, "name", where)),
                is_thing=bool(_require(entry, "is_thing", where)),
            )
        )
    return tuple(vocab)


def _parse_primitives(raw: list[dict], where: str) -> list[GraphicalPrimitive]:
    prims: list[GraphicalPrimitive] = []
    for j, rec in enumerate(raw):
        loc = f"{where}, primitive {j}"
        kind = str(_require(rec, "kind", loc))
        geometry = _require(rec, "geometry", loc)
        layer = int(_require(rec, "layer", loc))
        semantic = int(_require(rec, "semantic", loc))
        instance = int(_require(rec, "instance", loc))
        try:
            if kind == "polyline":
                pts = [(float(x), float(y)) for x, y in geometry]
                prims.extend(decompose_polyline(pts, layer, semantic, instance))
            else:
                prims.append(
                    GraphicalPrimitive(
                        kind=kind,
                        geometry=tuple(float(v) for v in geometry),
                        layer=layer,
                        semantic=semantic,
                        instance=instance,
                    )
                )
        except (GeometryError, ValueError, TypeError) as err:
            raise DatasetError(f"{loc}: {err}") from err
    return prims


def load_dataset(path: str | Path) -> list[Drawing]:
    """Load and validate a dataset file; errors name the offending record."""
    with open(path) as fh:
        try:
            raw = json.load(fh)
        except json.JSONDecodeError as err:
            raise DatasetError(f"{path}: not valid JSON ({err})") from err
    if not isinstance(raw, dict):
        raise DatasetError(f"{path}: top level must be an object")
    vocab = parse_vocab(_require(raw, "class_vocab", str(path)))
    drawings = []
    for i, rec in enumerate(_require(raw, "drawings", str(path))):
        where = f"drawing {i} ({rec.get('id', '?')})"
        prims = _parse_primitives(_require(rec, "primitives", where), where)
        try:
            drawings.append(
                Drawing.build(
                    id=str(_require(rec, "id", where)),
                    width=float(_require(rec, "width", where)),
                    height=float(_require(rec, "height", where)),
                    num_layers=int(_require(rec, "num_layers", where)),
                    class_vocab=vocab,
                    primitives=prims,
                )
            )
        except ValueError as err:
            raise DatasetError(f"{where}: {err}") from err
    return drawings


def drawing_to_record(d: Drawing) -> dict:
    return {
        "id": d.id,
        "width": d.width,
        "height": d.height,
        "num_layers": d.num_layers,
        "primitives": [
            {
                "kind": p.kind,
                "geometry": list(p.geometry),
                "layer": p.layer,
                "semantic": p.semantic,
                "instance": p.instance,
            }
            for p in d.primitives
        ],
    }


def save_dataset(path: str | Path, drawings: Sequence[Drawing]) -> None:
    """Write drawings (sharing one vocabulary) back to the JSON layout."""
    if not drawings:
        raise DatasetError("cannot save an empty dataset (no vocabulary to emit)")
    vocab = drawings[0].class_vocab
    for d in drawings[1:]:
        if d.class_vocab != vocab:
            raise DatasetError(f"drawing {d.id}: vocabulary differs from the first drawing")
    payload = {
        "class_vocab": [
            {"id": c.id, "name": c.name, "is_thing": c.is_thing} for c in vocab
        ],
        "drawings": [drawing_to_record(d) for d in drawings],
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        json.dump(payload, fh)
        fh.write("\n")
