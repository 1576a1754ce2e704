import json

import numpy as np
import pytest

from distlab import io
from distlab.cli import main
from distlab.field import interpolate, load_field

TWO = {"dim": 2, "primitives": [{"type": "point", "at": [-1, 0]}, {"type": "point", "at": [1, 0]}]}
ONE = {"dim": 2, "primitives": [{"type": "point", "at": [0, 0]}]}


@pytest.fixture
def scenes(tmp_path):
    paths = {}
    for name, doc in (("two", TWO), ("one", ONE)):
        p = tmp_path / f"{name}_scene.json"
        p.write_text(json.dumps(doc))
        paths[name] = str(p)
    return paths


def run(argv, capsys):
    code = main(argv)
    return code, capsys.readouterr()


def test_field_dumps(tmp_path, scenes, capsys):
    out = str(tmp_path / "two.bin")
    code, cap = run(["field", "--scene", scenes["two"], "--bbox", "-2", "-2", "2", "2", "--res", "201",
                     "--out", out], capsys)
    assert code == 0
    f = load_field(out)
    assert f.values.min() == 0 and json.loads(cap.out)["lipschitz_excess"] <= 1e-9
    out4 = str(tmp_path / "two4.bin")
    assert main(["field", "--scene", scenes["two"], "--norm", "lp:4", "--bbox", "-2", "-2", "2", "2",
                 "--res", "201", "--out", out4]) == 0
    assert interpolate(load_field(out4), [0.0, 0.0]) == pytest.approx(1.0)


def test_field_errors(tmp_path, scenes, capsys, monkeypatch):
    bad = tmp_path / "bad.json"
    bad.write_text('{"dim": 2, "primitives": [\n {"type": "point", "at": [1]}\n]}')
    code, cap = run(["field", "--scene", str(bad), "--bbox", "-1", "-1", "1", "1", "--out",
                     str(tmp_path / "x.bin")], capsys)
    assert code == 2 and "line 2" in cap.err
    monkeypatch.setenv("DISTLAB_MEM_CAP_MB", "1")
    code, _ = run(["field", "--scene", scenes["two"], "--bbox", "-2", "-2", "2", "2", "--res", "2001",
                   "--out", str(tmp_path / "y.bin")], capsys)
    assert code == 3


def test_sweep(tmp_path, scenes, capsys):
    out = str(tmp_path / "two.bin")
    main(["field", "--scene", scenes["two"], "--bbox", "-2", "-2", "2", "2", "--res", "201", "--out", out])
    capsys.readouterr()
    code, cap = run(["sweep", "--field", out, "--rmin", "0.25", "--rmax", "1.75", "--count", "7"], capsys)
    assert code == 0
    doc = json.loads(cap.out)
    flagged = [e["r"] for e in doc["sweep"]["results"] if e["verdict"] == "NonManifold"]
    assert flagged == [1.0]
    assert doc["links"][0]["nearest_critical_value"] == pytest.approx(1.0, abs=0.04)
    code, _ = run(["sweep", "--field", out, "--rmin", "10", "--rmax", "20", "--count", "3"], capsys)
    assert code == 4


def test_sweep_single_point(scenes, capsys):
    code, cap = run(["sweep", "--scene", scenes["one"], "--bbox", "-2", "-2", "2", "2", "--res", "101",
                     "--rmin", "0.25", "--rmax", "1.75", "--count", "7"], capsys)
    assert code == 0
    assert all(e["verdict"] == "Manifold" for e in json.loads(cap.out)["sweep"]["results"])


def test_sweep_matches_in_process(tmp_path, scenes, capsys):
    out = str(tmp_path / "two.bin")
    main(["field", "--scene", scenes["two"], "--bbox", "-2", "-2", "2", "2", "--res", "101", "--out", out])
    capsys.readouterr()
    args = ["--rmin", "0.5", "--rmax", "1.5", "--count", "5"]
    _, a = run(["sweep", "--field", out] + args, capsys)
    _, b = run(["sweep", "--scene", scenes["two"], "--bbox", "-2", "-2", "2", "2", "--res", "101"] + args, capsys)
    assert a.out == b.out


def test_levelset_crit_reach(tmp_path, scenes, capsys):
    common = ["--scene", scenes["one"], "--bbox", "-2", "-2", "2", "2", "--res", "101"]
    code, cap = run(["levelset", "--r", "1.0"] + common, capsys)
    doc = json.loads(cap.out)
    assert code == 0 and doc["verdict"] == "Manifold" and doc["components"] == 1
    code, cap = run(["crit"] + common, capsys)
    assert code == 0 and json.loads(cap.out)["critical_points"] == []
    code, cap = run(["reach", "--r", "1.0", "--boundary-samples", "2", "--samples", "300"] + common, capsys)
    assert code == 0 and 0.8 <= json.loads(cap.out)["global_reach"] <= 1.2
    code, _ = run(["levelset", "--r", "5"] + common, capsys)
    assert code == 4


def test_dc_sard(tmp_path, capsys):
    p = tmp_path / "f.json"
    p.write_text('{"dim": 1, "plus": [[1, 0], [-1, 0]], "minus": [[1, -1], [-1, 1]]}')
    code, cap = run(["dc-sard", "--function", str(p), "--box", "-3", "3", "--delta", "0.01"], capsys)
    doc = json.loads(cap.out)
    assert code == 0 and doc["stationary_values"] == [-1, 1]
    assert doc["hausdorff"]["premeasure"] == pytest.approx(0.2)
    p.write_text("{")
    assert main(["dc-sard", "--function", str(p), "--box", "-3", "3", "--delta", "0.01"]) == 2


def test_cone(capsys):
    code, cap = run(["cone", "--alpha", "auto", "--samples", "100000", "--seed", "1", "--pairs", "2000"], capsys)
    doc = json.loads(cap.out)
    assert code == 0 and doc["witness"] is None and doc["inequality_violations"] == 0
    code, cap = run(["cone", "--alpha", "0.1", "--samples", "100000", "--seed", "1"], capsys)
    assert code == 0 and json.loads(cap.out)["witness"] is not None
    assert main(["cone", "--alpha", "-1"]) == 2
    assert main(["nonsense"]) == 2


def test_json_format():
    text = io.dumps({"a": 0.1, "b": [1, 2.5], "c": None, "d": np.float64(1 / 3), "e": True})
    assert "0.10000000000000001" in text and "0.33333333333333331" in text
    assert json.loads(text)["b"] == [1, 2.5]
    assert io.dumps({"x": [0.1]}) == io.dumps({"x": [0.1]})
