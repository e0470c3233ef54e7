import csv
import io
import json
import math
import subprocess
import sys

import pytest

from geoflow.cli import build_parser, main
from geoflow.metric import DoubledTriangle, Round


@pytest.fixture
def files(tmp_path):
    r = tmp_path / "round.json"
    r.write_text(Round(1.0).to_json())
    t = tmp_path / "dt.json"
    t.write_text(DoubledTriangle(1.0).to_json())
    return r, t


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


def test_slp_round(capsys):
    code, out, _ = run(capsys, "slp", "--d", "3.14159265", "--k", "1")
    assert code == 0
    doc = json.loads(out)
    assert doc["mu"] == pytest.approx(2.0, abs=1e-4)
    assert {"mu", "lower", "upper", "grid_shift"} <= set(doc)
    assert doc["lower"] - 1e-4 <= doc["mu"] <= doc["upper"] + 1e-4


def test_slp_transformed_and_flat(capsys):
    code, out, _ = run(capsys, "slp", "--d", "2.6", "--transformed")
    assert code == 0
    doc = json.loads(out)
    assert doc["lower"] < doc["mu"] < doc["upper"]
    code, out, _ = run(capsys, "slp", "--d", "2", "--k", "0")
    assert json.loads(out)["mu"] == pytest.approx((math.pi / 2) ** 2, abs=1e-4)


def test_slp_bad_input(capsys):
    code, _, err = run(capsys, "slp", "--d", "4", "--k", "1")
    assert code == 2
    assert json.loads(err)["error"] == "InputError"
    assert run(capsys, "slp", "--k", "1")[0] == 2
    assert run(capsys, "slp", "--d", "2", "--k", "0", "--transformed")[0] == 2


def test_malformed_json_reports_position(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text('{"variant": "round",\n "radius": 1.0,,}')
    code, _, err = run(capsys, "verify", bad)
    assert code == 2
    assert "line 2, column 16" in json.loads(err)["message"]


def test_missing_file(capsys, tmp_path):
    code, _, err = run(capsys, "report", tmp_path / "nope.json")
    assert code == 2
    assert "cannot read" in json.loads(err)["message"]


def test_unknown_flag_rejected(capsys):
    with pytest.raises(SystemExit) as info:
        main(["slp", "--d", "2", "--bogus"])
    assert info.value.code == 2


def test_verify_triangle(capsys, files):
    _, t = files
    code, out, _ = run(capsys, "verify", t, "--resolution", "64")
    assert code == 0
    rows = list(csv.DictReader(io.StringIO(out)))
    names = {r["name"]: r for r in rows}
    assert names["L<=4D"]["pass"] == "True"
    assert names["L<=2D/sqrt(delta)"]["pass"] == ""


def test_report_json_to_file(capsys, files, tmp_path):
    _, t = files
    out = tmp_path / "rep.json"
    code, _, _ = run(capsys, "report", "--metric", t, "--resolution", "64", "--out", out)
    assert code == 0
    doc = json.loads(out.read_text())
    assert doc["L"] == pytest.approx(math.sqrt(3), abs=1e-6)


def test_geodesic_csv(capsys, files):
    r, _ = files
    code, out, _ = run(capsys, "geodesic", r, "--from", "1,0,0", "--to", "0,1,0")
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["chart", "x", "y", "cumulative_length"]
    assert float(rows[-1][3]) == pytest.approx(math.pi / 2, abs=1e-8)


def test_geodesic_bad_point(capsys, files):
    r, _ = files
    code, _, err = run(capsys, "geodesic", r, "--from", "1,0", "--to", "0,1,0")
    assert code == 2


def test_shorten_theta_with_trace(capsys, files, tmp_path):
    r, _ = files
    trace = tmp_path / "trace.jsonl"
    code, out, _ = run(capsys, "shorten", r, "--theta", "--trace", trace)
    assert code == 0
    doc = json.loads(out)
    assert doc["kind"] == "StationaryTheta"
    assert doc["length"] == pytest.approx(3 * math.pi, abs=1e-8)
    assert trace.read_text().strip()


def test_shorten_level_curve(capsys, files):
    r, _ = files
    code, out, _ = run(capsys, "shorten", r, "--level", "0.0", "--nodes", "16")
    assert code == 0
    assert json.loads(out)["length"] == pytest.approx(2 * math.pi, abs=1e-3)


def test_sweep_single_value(capsys):
    code, out, _ = run(
        capsys, "sweep", "--family", "conformal", "--t", "0.05:0.05:0.05", "--check", "pinched", "--resolution", "64"
    )
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert rows[0] == ["t", "delta", "D", "L", "margin", "pass"]
    assert len(rows) == 2
    assert float(rows[1][1]) > 0.8307
    assert rows[1][5] == "True" and float(rows[1][4]) > 0


def test_sweep_bad_range(capsys):
    assert run(capsys, "sweep", "--c", "1.2:1.0:0.1")[0] == 2
    assert run(capsys, "sweep", "--c", "1.0:1.1:0.1", "--resolution", "32")[0] == 2


def test_help_documents_defaults():
    text = build_parser().format_help()
    assert "report" in text and "sweep" in text
    sub = subprocess.run([sys.executable, "-m", "geoflow.cli", "slp", "--help"], capture_output=True, text=True)
    assert sub.returncode == 0
    assert "default: 512" in sub.stdout
