import json

import pytest

from symspot.dataset_io import DatasetError, load_dataset, save_dataset
from symspot.synthetic import generate_dataset

from conftest import grid_drawing


def _write(tmp_path, payload, name="data.json"):
    path = tmp_path / name
    path.write_text(json.dumps(payload))
    return path


VOCAB_JSON = [
    {"id": 0, "name": "stuffy", "is_thing": False},
    {"id": 1, "name": "thingy", "is_thing": True},
]


def _drawing_json(prims):
    return {
        "class_vocab": VOCAB_JSON,
        "drawings": [
            {"id": "d0", "width": 10.0, "height": 10.0, "num_layers": 2,
             "primitives": prims}
        ],
    }


def test_load_basic(tmp_path):
    path = _write(tmp_path, _drawing_json([
        {"kind": "segment", "geometry": [0, 0, 1, 0], "layer": 0, "semantic": 0,
         "instance": -1},
        {"kind": "circle", "geometry": [5, 5, 1], "layer": 1, "semantic": 1,
         "instance": 0},
        {"kind": "arc", "geometry": [5, 5, 2, 0.0, 1.0], "layer": 1, "semantic": 1,
         "instance": 0},
        {"kind": "ellipse", "geometry": [2, 2, 2, 1, 0.2], "layer": 1, "semantic": 1,
         "instance": 1},
    ]))
    (d,) = load_dataset(path)
    assert len(d) == 4
    assert d.num_layers == 2
    assert [p.kind for p in d.primitives] == ["segment", "circle", "arc", "ellipse"]


def test_polyline_decomposed_on_load(tmp_path):
    path = _write(tmp_path, _drawing_json([
        {"kind": "polyline", "geometry": [[0, 0], [1, 0], [1, 1], [0, 1]],
         "layer": 0, "semantic": 0, "instance": -1},
    ]))
    (d,) = load_dataset(path)
    assert len(d) == 3
    assert all(p.kind == "polyline-edge" for p in d.primitives)
    assert d.primitives[2].geometry == (1, 1, 0, 1)


def test_save_load_round_trip(tmp_path):
    drawings = [grid_drawing(n=3, seed=5), grid_drawing(n=4, seed=9)]
    path = tmp_path / "ds.json"
    save_dataset(path, drawings)
    loaded = load_dataset(path)
    assert loaded == drawings  # field-for-field, floats exact


def test_round_trip_stability_through_synthetic(tmp_path):
    drawings = generate_dataset(21, 3)
    p1 = tmp_path / "a.json"
    p2 = tmp_path / "b.json"
    save_dataset(p1, drawings)
    once = load_dataset(p1)
    save_dataset(p2, once)
    twice = load_dataset(p2)
    assert once == twice
    assert once == drawings


def test_missing_field_named(tmp_path):
    path = _write(tmp_path, {"class_vocab": VOCAB_JSON})
    with pytest.raises(DatasetError, match="drawings"):
        load_dataset(path)
    path = _write(tmp_path, _drawing_json([
        {"kind": "segment", "geometry": [0, 0, 1, 0], "layer": 0, "semantic": 0},
    ]))
    with pytest.raises(DatasetError, match="primitive 0"):
        load_dataset(path)


def test_degenerate_primitive_rejected_with_location(tmp_path):
    path = _write(tmp_path, _drawing_json([
        {"kind": "segment", "geometry": [0, 0, 1, 0], "layer": 0, "semantic": 0,
         "instance": -1},
        {"kind": "circle", "geometry": [5, 5, 0], "layer": 0, "semantic": 0,
         "instance": -1},
    ]))
    with pytest.raises(DatasetError, match="primitive 1"):
        load_dataset(path)


def test_stuff_with_instance_id_rejected(tmp_path):
    path = _write(tmp_path, _drawing_json([
        {"kind": "segment", "geometry": [0, 0, 1, 0], "layer": 0, "semantic": 0,
         "instance": 3},
    ]))
    with pytest.raises(DatasetError, match="stuff"):
        load_dataset(path)


def test_thing_without_instance_id_rejected(tmp_path):
    path = _write(tmp_path, _drawing_json([
        {"kind": "segment", "geometry": [0, 0, 1, 0], "layer": 0, "semantic": 1,
         "instance": -1},
    ]))
    with pytest.raises(DatasetError, match="instance"):
        load_dataset(path)


def test_unknown_kind_rejected(tmp_path):
    path = _write(tmp_path, _drawing_json([
        {"kind": "bezier", "geometry": [0, 0, 1, 0], "layer": 0, "semantic": 0,
         "instance": -1},
    ]))
    with pytest.raises(DatasetError, match="bezier"):
        load_dataset(path)


def test_invalid_json_rejected(tmp_path):
    path = tmp_path / "broken.json"
    path.write_text("{not json")
    with pytest.raises(DatasetError, match="JSON"):
        load_dataset(path)


def test_save_empty_dataset_rejected(tmp_path):
    with pytest.raises(DatasetError):
        save_dataset(tmp_path / "x.json", [])
