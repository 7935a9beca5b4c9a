import csv
import io
import json
import subprocess
import sys

import pytest

from heteronet import __version__
from heteronet.cli import main
from heteronet.network import ParamSet, format_params

REGIME_VI = {'c_13': 0.42, 'c_14': 2.17, 'c_21': 3.06, 'c_32': 0.4, 'c_42': 0.54, 'c_43': 0.31, 'e_12': 1.64,
             'e_23': 0.42, 'e_24': 0.72, 'e_31': 0.61, 'e_34': 0.34, 'e_41': 2.63}


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def read_csv(text):
    comments = [ln for ln in text.splitlines() if ln.startswith("#")]
    body = "\n".join(ln for ln in text.splitlines() if not ln.startswith("#"))
    return comments, list(csv.DictReader(io.StringIO(body)))


@pytest.fixture
def ks_file(tmp_path):
    path = tmp_path / "ks.txt"
    path.write_text(format_params(ParamSet.uniform("ks").replace(c_13=1.5)))
    return str(path)


def test_matrices_json(capsys, ks_file):
    code, out, _ = run(capsys, "matrices", "--params", ks_file)
    assert code == 0
    doc = json.loads(out)
    assert doc["tool"] == "heteronet" and doc["version"] == __version__
    assert doc["params"]["network"] == "kirk_silber" and doc["params"]["c_13"] == 1.5
    res = doc["result"]
    assert "m123" in res["matrices"] and "M2(3)" in res["matrices"]
    assert res["scalars"]["delta3"] == pytest.approx(1.5)
    assert all(c["agrees"] for c in res["closed_form_check"].values())


def test_map_csv(capsys):
    code, out, _ = run(capsys, "map", "--network", "dc", "--samples", "101")
    assert code == 0
    comments, rows = read_csv(out)
    assert comments[0] == f"# heteronet {__version__}"
    assert any(c.startswith("# params:") for c in comments)
    assert any(c.startswith("# config:") and '"samples": 101' in c for c in comments)
    assert list(rows[0]) == ["theta", "f_theta", "branch_label"]
    assert {r["branch_label"] for r in rows} == {"C4", "C34"}
    # 17 significant digits round-trip.
    assert all(float(repr(float(r["theta"]))) == float(r["theta"]) for r in rows)


def test_cobweb_csv(capsys, ks_file):
    code, out, _ = run(capsys, "cobweb", "--params", ks_file, "--theta0", "-0.3", "--steps", "20")
    assert code == 0
    comments, rows = read_csv(out)
    assert [int(r["step"]) for r in rows] == list(range(21))
    assert {r["branch_label"] for r in rows[:-1]} == {"C3"}
    assert any("halt_reason" in c for c in comments)


def test_fixed_points_json(capsys):
    code, out, _ = run(capsys, "fixed-points", "--network", "t", "--set", "c_13=1.5")
    assert code == 0
    res = json.loads(out)["result"]
    names = {fp["name"] for fp in res["fixed_points"]}
    assert {"theta3*", "theta4*", "theta34*"} <= names
    assert len(res["switch_points"]) == 2
    assert set(res["classification"]) == {"C3", "C4", "C34"}


def test_bifurcations_json(capsys):
    code, out, _ = run(capsys, "bifurcations", "--network", "dc", "--path", "c_43:0.2:3", "--samples", "57")
    assert code == 0
    events = json.loads(out)["result"]["events"]
    fold = [e for e in events if e["kind"] == "fold"]
    assert fold and fold[0]["validated"]


def test_scan_csv_and_workers(capsys, monkeypatch):
    args = ["scan", "--network", "dc", "--axis1", "c_43:0.5:4:6", "--axis2", "t_13:0.1:3:5"]
    code, out, _ = run(capsys, *args)
    assert code == 0
    _, rows = read_csv(out)
    assert len(rows) == 30
    assert {"c_43", "t_13", "verdict_C4", "verdict_C34", "omega34"} <= set(rows[0])
    monkeypatch.setenv("HETERONET_THREADS", "2")
    code, out2, _ = run(capsys, *args)
    assert out2 == out


def test_simulate_csv(capsys, ks_file, tmp_path):
    target = tmp_path / "sim.csv"
    code, out, _ = run(capsys, "simulate", "--params", ks_file, "--x0-seed", "theta=-0.3", "--t-end", "60",
                       "--out", str(target))
    assert code == 0 and out == ""
    comments, rows = read_csv(target.read_text())
    assert list(rows[0]) == ["t", "X1", "X2", "X3", "X4", "dwell_label"]
    assert float(rows[-1]["t"]) == pytest.approx(60.0)
    assert {r["dwell_label"] for r in rows} >= {"1", "2", "3"}


def test_simulate_original_coordinates(capsys, ks_file):
    code, out, _ = run(capsys, "simulate", "--params", ks_file, "--x0", "0.3,0.5,0.2,0.4", "--t-end", "5",
                       "--coords", "orig")
    assert code == 0
    _, rows = read_csv(out)
    assert float(rows[0]["X1"]) == 0.3


def test_verify_json(capsys, tmp_path):
    path = tmp_path / "t.txt"
    path.write_text(format_params(ParamSet("t", REGIME_VI)))
    code, out, _ = run(capsys, "verify", "--network", "tournament", "--params", str(path),
                       "--x0-seed", "theta=-0.0932", "--horizon", "75")
    assert code == 0
    res = json.loads(out)["result"]
    assert res["agrees"] is True
    assert [r[0] for r in res["predicted_runs"]] == ["C3", "C34", "C4"]


def test_outputs_are_deterministic(capsys, ks_file, tmp_path):
    outs = []
    for name in ("a.json", "b.json"):
        target = tmp_path / name
        assert run(capsys, "fixed-points", "--params", ks_file, "--out", str(target))[0] == 0
        outs.append(target.read_bytes())
    assert outs[0] == outs[1]


# -- errors --------------------------------------------------------------------

def test_unknown_subcommand_is_usage_error(capsys):
    code, out, err = run(capsys, "plot")
    assert code == 2 and out == ""
    assert json.loads(err)["error"] == "usage"


def test_invalid_params_report_validation(capsys, tmp_path):
    path = tmp_path / "bad.txt"
    path.write_text("network = ks\nc_13 = -1\n")
    code, _, err = run(capsys, "matrices", "--params", str(path))
    assert code == 2
    rec = json.loads(err)
    assert rec["error"] == "invalid parameters"
    assert "nonpositive: c_13" in rec["validation"]["errors"]
    assert "missing: t_34" in rec["validation"]["errors"]


def test_missing_network(capsys, tmp_path):
    path = tmp_path / "p.txt"
    path.write_text("c_13 = 1\n")
    code, _, err = run(capsys, "map", "--params", str(path))
    assert code == 2 and json.loads(err)["error"] == "usage"


def test_bad_flag_values(capsys):
    assert run(capsys, "cobweb", "--network", "ks", "--theta0", "0.5")[0] == 2
    assert run(capsys, "scan", "--network", "ks", "--axis1", "c_13:1:2", "--axis2", "t_34:1:2:3")[0] == 2
    assert run(capsys, "simulate", "--network", "ks")[0] == 2
    assert run(capsys, "map", "--network", "ks", "--set", "c_13")[0] == 2


def test_missing_file_is_runtime_error(capsys, tmp_path):
    code, _, err = run(capsys, "matrices", "--params", str(tmp_path / "nope.txt"))
    assert code == 1 and json.loads(err)["error"] == "FileNotFoundError"


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "heteronet", "--version"], capture_output=True, text=True)
    assert proc.returncode == 0 and __version__ in proc.stdout
