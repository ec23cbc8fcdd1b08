import json

import numpy as np
import pytest

from icpm.cli import main


def _read_csv(path):
    lines = path.read_text().split("\n")
    meta = [l for l in lines if l.startswith("#")]
    body = [l for l in lines if l and not l.startswith("#")]
    return meta, body


def test_design_writes_report(tmp_path):
    out = tmp_path / "d"
    code = main(["design", "--model", "cart-pendulum", "--anchor", "0", "0.45", "--section", "0",
                 "--g", "9.81", "--out-dir", str(out)])
    assert code == 0
    rep = json.loads((out / "design_report.json").read_text())
    for key in ("z_star", "A", "B", "K", "floquet_open_loop", "floquet_closed_loop", "eps1", "eps2", "tolerances"):
        assert key in rep
    assert rep["stable"] and len(rep["A"]) == 3
    assert len(rep["_meta"]["config_hash"]) == 64
    meta, body = _read_csv(out / "reduced_table.csv")
    assert body[0] == "q2,mass,potential"
    assert any(l.startswith("# config_hash:") for l in meta)


def test_malformed_config_leaves_no_output(tmp_path):
    cfg = tmp_path / "bad.json"
    cfg.write_text(json.dumps({"model": "cart-pendulum", "extra": 1}))
    out = tmp_path / "o"
    assert main(["design", "--config", str(cfg), "--out-dir", str(out)]) == 2
    assert not out.exists()
    assert main(["design", "--model", "cart-pendulum", "--param", "m_c=-1", "--out-dir", str(out)]) == 2
    assert not out.exists()


def test_unstable_design_exit(tmp_path):
    # a destabilizing inline gain
    code = main(["design", "--gain", "[[0, 0, -3]]", "--out-dir", str(tmp_path / "u")])
    assert code == 4


def test_simulate_is_deterministic(tmp_path):
    args = ["simulate", "--model", "cart-pendulum", "--x0", "0.1", "0.4", "-0.1", "-0.2", "--t-end", "8",
            "--out-dir", str(tmp_path / "s")]
    assert main(args) == 0
    first = {f: (tmp_path / "s" / f).read_bytes() for f in ("trajectory.csv", "events.csv", "summary.json")}
    assert main(args) == 0
    for f, data in first.items():
        assert (tmp_path / "s" / f).read_bytes() == data
    assert b"\r\n" not in first["trajectory.csv"]
    meta, body = _read_csv(tmp_path / "s" / "trajectory.csv")
    assert body[0] == "t,x,theta,x_dot,theta_dot,rho1,E,event_flag"
    row = body[1].split(",")
    assert row[1] == "0.10000000000000001"  # 17 significant digits
    _, ev = _read_csv(tmp_path / "s" / "events.csv")
    assert ev[0].startswith("k,t_k,z_minus1,z_minus2,z_minus3,z_plus1")
    summary = json.loads(first["summary.json"])
    assert summary["convergence_time"] < 8
    assert summary["crossings"]["k"][0] == 1


def test_simulate_with_report(tmp_path):
    assert main(["design", "--out-dir", str(tmp_path)]) == 0
    report = tmp_path / "design_report.json"
    code = main(["simulate", "--report", str(report), "--x0", "0", "0", "0", "0", "--t-end", "4",
                 "--out-dir", str(tmp_path / "r")])
    assert code == 0
    summary = json.loads((tmp_path / "r" / "summary.json").read_text())
    np.testing.assert_allclose(summary["K"], json.loads(report.read_text())["K"])


def test_divergence_exit_keeps_trajectory(tmp_path):
    out = tmp_path / "v"
    code = main(["simulate", "--model", "tiptoebot", "--x0", "-0.1", "0.2", "0.05", "3.3", "-6.0", "0.4",
                 "--divergence-bound", "0.5", "--out-dir", str(out)])
    assert code == 5
    assert json.loads((out / "summary.json").read_text())["status"] == "diverged"
    _, body = _read_csv(out / "trajectory.csv")
    assert len(body) > 10


def test_wrong_initial_length(tmp_path):
    assert main(["simulate", "--x0", "0", "0", "0", "--out-dir", str(tmp_path / "w")]) == 2


def test_phase_portrait(tmp_path):
    out = tmp_path / "p"
    assert main(["phase-portrait", "--model", "tiptoebot", "--q2-grid", "-1", "1", "5",
                 "--q2dot-grid", "-4", "4", "5", "--out-dir", str(out)]) == 0
    meta, body = _read_csv(out / "phase_portrait.csv")
    assert body[0] == "q2,q2dot,E,level_offset"
    assert len(body) == 26
    assert "# c_d: 4.5" in meta
    rows = np.array([[float(v) for v in r.split(",")] for r in body[1:]])
    centre = rows[(rows[:, 0] == 0) & (rows[:, 1] == 0)]
    assert centre[0, 2] == pytest.approx(rows[:, 2].min())


def test_phase_portrait_empty_grid(tmp_path):
    out = tmp_path / "e"
    assert main(["phase-portrait", "--q2-grid", "-0.6", "0.6", "0", "--out-dir", str(out)]) == 0
    _, body = _read_csv(out / "phase_portrait.csv")
    assert body == ["q2,q2dot,E,level_offset"]


def test_cart_portrait_stays_in_regular_band(tmp_path):
    out = tmp_path / "c"
    assert main(["phase-portrait", "--q2-grid", "-0.61", "0.61", "7", "--q2dot-grid", "-1", "1", "3",
                 "--out-dir", str(out)]) == 0
    _, body = _read_csv(out / "phase_portrait.csv")
    q2 = {float(r.split(",")[0]) for r in body[1:]}
    assert max(abs(v) for v in q2) < 0.61


def test_verify_subset(capsys):
    assert main(["verify", "--only", "8g", "3"]) == 1
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("[PASS] 8g")
    assert lines[1].startswith("[FAIL] 3")
    assert main(["verify", "--only", "99"]) == 2
