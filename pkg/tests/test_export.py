import json

import numpy as np

from icpm.export import format_float, write_csv, write_json


def test_float_format_roundtrips():
    for v in (0.1, 1 / 3, -2.5e-300, 123456789.123456789):
        assert float(format_float(v)) == v
    assert format_float(0.1) == "0.10000000000000001"


def test_csv_layout(tmp_path):
    p = tmp_path / "a.csv"
    write_csv(p, ["a", "b", "flag"], [[0.5, 1e-20, True]], {"config_hash": "abc", "tolerances": {"rtol": 1e-10}})
    text = p.read_bytes().decode()
    assert "\r" not in text
    lines = text.splitlines()
    assert lines[0].startswith("# tool: icpm")
    assert "# config_hash: abc" in lines
    assert lines[-2:] == ["a,b,flag", "0.5,9.9999999999999995e-21,1"]


def test_json_handles_arrays_and_complex(tmp_path):
    p = tmp_path / "r.json"
    write_json(p, {"eig": np.array([1 + 2j, 3 - 1j]), "A": np.eye(2), "x": np.float64(0.25)}, {"k": 1})
    doc = json.loads(p.read_text())
    assert doc["eig"] == [[1.0, 2.0], [3.0, -1.0]]
    assert doc["A"] == [[1.0, 0.0], [0.0, 1.0]] and doc["x"] == 0.25
    assert doc["_meta"]["k"] == 1
