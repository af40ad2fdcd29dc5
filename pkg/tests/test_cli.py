import csv
import json
from pathlib import Path

import numpy as np
import pytest

from mimo_noma import capacity
from mimo_noma.cli import main
from mimo_noma.model import EXAMPLE_2X2_CHANNEL, write_channel

CONFIGS = Path(__file__).resolve().parents[1] / "configs"


def _rows(path):
    with open(path) as fh:
        return list(csv.DictReader(fh))


@pytest.fixture
def ch2x2(tmp_path):
    p = tmp_path / "ch2x2.txt"
    write_channel(p, EXAMPLE_2X2_CHANNEL)
    return p


def test_capacity_command(tmp_path, ch2x2):
    out = tmp_path / "cap"
    assert main(["capacity", "--channel", str(ch2x2), "--noise-var", "0.5", "--out-dir", str(out)]) == 0
    summary = _rows(out / "summary.csv")
    assert float(summary[0]["value"]) == capacity.sum_capacity(EXAMPLE_2X2_CHANNEL, 0.5)
    assert len(_rows(out / "subsets.csv")) == 3
    assert len(_rows(out / "extreme_points.csv")) == 2
    man = json.loads((out / "manifest.json").read_text())
    assert man["command"] == "capacity" and set(man["outputs"]) == {"subsets.csv", "extreme_points.csv",
                                                                    "summary.csv"}


def test_unit_channel_sum_is_one(tmp_path):
    p = tmp_path / "one.txt"
    p.write_text("1\n")
    assert main(["capacity", "--channel", str(p), "--noise-var", "1", "--out-dir", str(tmp_path)]) == 0
    assert float(_rows(tmp_path / "summary.csv")[0]["value"]) == 1.0


def test_parse_error_exit_code(tmp_path, capsys):
    p = tmp_path / "bad.txt"
    p.write_text("1 2\n3\n")
    assert main(["capacity", "--channel", str(p), "--noise-var", "1", "--out-dir", str(tmp_path)]) == 2
    assert ":2:" in capsys.readouterr().err
    p.write_text("")
    assert main(["capacity", "--channel", str(p), "--noise-var", "1", "--out-dir", str(tmp_path)]) == 2


def test_rates_sweep_shape(tmp_path, ch2x2):
    out = tmp_path / "r"
    argv = ["rates", "--channel", str(ch2x2), "--noise-var", "0.5", "--sweep", "1:1e-3:1e3:25", "--out-dir", str(out)]
    assert main(argv) == 0
    rows = _rows(out / "rates.csv")
    r2 = np.array([float(r["R1"]) for r in rows])
    tot = np.array([float(r["sum"]) for r in rows])
    assert np.all(np.diff(r2) > 0)
    assert np.allclose(tot, capacity.sum_capacity(EXAMPLE_2X2_CHANNEL, 0.5), atol=1e-12)


def test_rates_symmetric_and_malformed(tmp_path):
    p = tmp_path / "sym.txt"
    p.write_text("1 0.4\n0.4 1\n")
    assert main(["rates", "--channel", str(p), "--noise-var", "1", "--gamma", "1,1", "--out-dir",
                 str(tmp_path)]) == 0
    row = _rows(tmp_path / "rates.csv")[0]
    assert float(row["R0"]) == pytest.approx(float(row["R1"]), abs=1e-12)
    for bad in ("1,x", "1", "1,-2"):
        assert main(["rates", "--channel", str(p), "--noise-var", "1", "--gamma", bad, "--out-dir",
                     str(tmp_path)]) == 2
    assert main(["rates", "--channel", str(p), "--noise-var", "1", "--sweep", "5:1:2:3", "--out-dir",
                 str(tmp_path)]) == 2


def test_track_command(tmp_path, ch2x2):
    assert main(["track", "--channel", str(ch2x2), "--noise-var", "0.5", "--gamma", "1,10", "--points", "7",
                 "--out-dir", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "track.csv")
    assert len(rows) == 7 and float(rows[0]["v1"]) == 1.0


def test_gamma_search_on_face(tmp_path, ch2x2):
    pts = capacity.all_extreme_points(EXAMPLE_2X2_CHANNEL, 0.5)
    t = 0.3 * pts[0].rates + 0.7 * pts[1].rates
    assert main(["gamma-search", "--channel", str(ch2x2), "--noise-var", "0.5", "--target",
                 f"{float(t[0])!r},{float(t[1])!r}", "--out-dir", str(tmp_path)]) == 0
    text = (tmp_path / "result.txt").read_text()
    assert "converged: True" in text and "target_projected: False" in text


def test_gamma_search_projection_and_bad_eps(tmp_path, ch2x2):
    base = ["gamma-search", "--channel", str(ch2x2), "--noise-var", "0.5", "--target", "9,9", "--out-dir",
            str(tmp_path)]
    assert main(base) == 0
    assert "target_projected: True" in (tmp_path / "result.txt").read_text()
    assert main(base + ["--tolerance", "0"]) == 2
    assert main(base + ["--tolerance", "-1"]) == 2


def test_gamma_search_nonconvergence_exit_code(tmp_path, ch2x2):
    corner = capacity.maximal_extreme_point(EXAMPLE_2X2_CHANNEL, 0.5, (0, 1)).rates
    argv = ["gamma-search", "--channel", str(ch2x2), "--noise-var", "0.5", "--target",
            f"{float(corner[0])!r},{float(corner[1])!r}", "--tolerance", "1e-15", "--delta", "1e-15", "--n-max", "1", "--out-dir", str(tmp_path)]
    assert main(argv) == 3


def test_threshold_command(tmp_path):
    argv = ["threshold", "--profile", str(CONFIGS / "profile_beta0p5.cfg"), "--lo", "-15", "--hi", "-10",
            "--tolerance", "0.05", "--out-dir", str(tmp_path)]
    assert main(argv) == 0
    rows = {r["quantity"]: r["value"] for r in _rows(tmp_path / "threshold.csv")}
    assert abs(float(rows["threshold_db"]) - (-13.14)) <= 0.3


def test_threshold_bracket_failure(tmp_path):
    assert main(["threshold", "--beta", "1", "--lo", "-30", "--hi", "-20", "--out-dir", str(tmp_path)]) == 3


def test_missing_lambda_profile(tmp_path):
    p = tmp_path / "p.cfg"
    p.write_text("n_u = 2\nn_r = 2\n")
    assert main(["exit", "--profile", str(p), "--ebn0=-10", "--out-dir", str(tmp_path)]) == 2
    assert main(["exit", "--out-dir", str(tmp_path), "--ebn0=-10"]) == 2
    assert main(["exit", "--beta", "7", "--out-dir", str(tmp_path), "--ebn0=-10"]) == 2


def test_exit_command(tmp_path):
    assert main(["exit", "--beta", "1", "--ebn0=-12", "--out-dir", str(tmp_path)]) == 0
    rows = _rows(tmp_path / "exit.csv")
    assert float(rows[-1]["v_out"]) <= 1e-4


def test_ber_command_and_replay(tmp_path):
    out = tmp_path / "ber"
    argv = ["ber", "--beta", "0.5", "--ebn0=-12,-8", "--n", "1000", "--trials", "1", "--max-outer", "5",
            "--seed", "4", "--out-dir", str(out)]
    assert main(argv) == 0
    rows = _rows(out / "ber.csv")
    assert [float(r["ebn0_db"]) for r in rows] == [-12.0, -8.0]
    first = (out / "ber.csv").read_bytes()
    again = tmp_path / "again"
    assert main(["replay", str(out / "manifest.json"), "--out-dir", str(again), "--verify"]) == 0
    assert (again / "ber.csv").read_bytes() == first


def test_replay_detects_tampering(tmp_path, ch2x2):
    out = tmp_path / "c"
    assert main(["capacity", "--channel", str(ch2x2), "--noise-var", "0.5", "--out-dir", str(out)]) == 0
    man = json.loads((out / "manifest.json").read_text())
    man["outputs"]["summary.csv"] = "0" * 64
    bad = tmp_path / "m.json"
    bad.write_text(json.dumps(man))
    assert main(["replay", str(bad), "--out-dir", str(tmp_path / "r"), "--verify"]) == 1
    assert main(["replay", str(tmp_path / "missing.json")]) == 2


def test_full_precision_output(tmp_path):
    p = tmp_path / "h.txt"
    p.write_text("0.1\n")
    assert main(["capacity", "--channel", str(p), "--noise-var", "0.3", "--out-dir", str(tmp_path)]) == 0
    val = _rows(tmp_path / "summary.csv")[0]["value"]
    assert float(val) == capacity.sum_capacity(np.array([[0.1]]), 0.3)
