import json
import math
import subprocess
import sys

import pytest

from biradon.cli import main, parse_angle, parse_field_spec, read_config
from biradon.discrete import triangular_lattice


def run_json(argv, capsys):
    code = main(argv)
    out = capsys.readouterr().out
    return code, json.loads(out)


def test_vertices_nondeg(capsys):
    code, rep = run_json(["vertices", "--case", "nondeg"], capsys)
    assert code == 0
    assert rep["schema"] == "biradon-report" and rep["schema_version"] == 1
    assert rep["results"]["vertices"] == ["(0, 0, 0)", "(0, 2/3, 1/3)", "(0, 1, 1)", "(1/2, 1/2, 1/2)",
                                          "(2/3, 0, 1/3)", "(2/3, 2/3, 1)", "(1, 0, 1)"]
    assert rep["verdicts"][0]["status"] == "pass"


def test_vertices_self_test_deg(capsys):
    code, rep = run_json(["vertices", "--case", "deg", "--self-test"], capsys)
    assert code == 0
    assert len(rep["results"]["vertices"]) == 6
    assert rep["results"]["self_test"]["ok"] is True


def test_triangles_json_and_csv_dir(tmp_path, capsys):
    path = tmp_path / "tri_lattice_10.csv"
    path.write_text(triangular_lattice(10, 10).to_csv())
    code, rep = run_json(["triangles", "--input", str(path)], capsys)
    assert code == 0
    r = rep["results"]
    assert r["points"] == 100 and r["triangles"] == r["triangles_via_B"] == 972
    assert r["pairs"] == 522


def test_eval_single_real_deterministic(capsys):
    argv = ["eval", "--theta", "1.0471975512", "--f", "ball:0.1", "--g", "annulus:1.0:0.4", "--at", "1,0"]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv) == 0
    second = capsys.readouterr().out
    assert first == second
    assert math.isfinite(float(first.strip()))


def test_eval_report_to_file(tmp_path, capsys):
    out = tmp_path / "r.json"
    argv = ["eval", "--theta", "pi/3", "--f", "const:1", "--g", "const:1", "--at", "0,0",
            "--half-width", "3", "--spacing", "0.25", "--nodes", "64", "--out", str(out)]
    assert main(argv) == 0
    rep = json.loads(out.read_text())
    # arc-length weights: B(1, 1) is the circumference
    assert rep["results"]["value"] == pytest.approx(2 * math.pi, abs=1e-12)


def test_config_precedence(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("# vertices run\ncase = deg\n")
    _, rep = run_json(["vertices", "--config", str(cfg)], capsys)
    assert rep["config"]["case"] == "deg"
    _, rep = run_json(["vertices", "--config", str(cfg), "--case", "nondeg"], capsys)
    assert rep["config"]["case"] == "nondeg"
    assert read_config(cfg) == {"case": "deg"}


@pytest.mark.parametrize("argv,field", [
    (["vertices", "--case", "sideways"], "case"),
    (["eval", "--theta", "abc", "--f", "ball:0.1", "--g", "ball:0.1", "--at", "0,0"], "theta"),
    (["eval", "--theta", "1", "--f", "ball:0.1", "--g", "ball:0.1"], "at"),
    (["acceptance", "--node-factor", "-1"], "node_factor"),
])
def test_usage_errors_exit_2(argv, field, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == 2
    assert field in capsys.readouterr().err


def test_unknown_config_key(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("colour = blue\n")
    with pytest.raises(SystemExit) as exc:
        main(["vertices", "--config", str(cfg)])
    assert exc.value.code == 2


def test_sharpness_resolution_exit_3(capsys):
    code = main(["sharpness", "--example", "ball_annulus", "--scales", "1/8,1/16,1/32", "--nodes", "64"])
    assert code == 3
    assert "resolution rejected" in capsys.readouterr().err


def test_sharpness_with_check(tmp_path, capsys):
    code, rep = run_json(["sharpness", "--example", "ball_annulus", "--scales", "1/4,1/8,1/16",
                          "--check", "3/2,3/2,1", "--csv-dir", str(tmp_path)], capsys)
    assert code == 0
    assert rep["results"]["constraint"]["consistent"] is True
    assert (tmp_path / "sweep_ball_annulus.csv").exists()


def test_acceptance_half_nodes_rejected(capsys):
    code, rep = run_json(["acceptance", "--only", "1,4,7a", "--node-factor", "0.5"], capsys)
    status = {v["name"]: v["status"] for v in rep["verdicts"]}
    assert status == {"criterion 1": "pass", "criterion 4": "rejected", "criterion 7a": "rejected"}
    assert code == 1


def test_acceptance_theta_pi_skips_nondegenerate(capsys):
    code, rep = run_json(["acceptance", "--only", "7b", "--theta", "pi"], capsys)
    assert rep["verdicts"][0]["status"] == "skip"
    assert code == 0


def test_report_deterministic_modulo_timings(capsys):
    argv = ["conditions", "--samples", "20", "--seed", "4"]
    _, a = run_json(argv, capsys)
    _, b = run_json(argv, capsys)
    for rep in (a, b):
        rep.pop("timings")
    assert json.dumps(a) == json.dumps(b)
    assert a["passed"]


@pytest.mark.parametrize("text,val", [("pi/3", math.pi / 3), ("2pi/3", 2 * math.pi / 3),
                                      ("3*pi/4", 3 * math.pi / 4), ("pi", math.pi), ("1.5", 1.5)])
def test_parse_angle(text, val):
    assert parse_angle(text) == pytest.approx(val, rel=1e-15)


def test_parse_field_spec_rejects_garbage():
    with pytest.raises(ValueError):
        parse_field_spec("hexagon:1")
    with pytest.raises(ValueError):
        parse_field_spec("ball:-1")


def test_console_script_entry_point():
    out = subprocess.run([sys.executable, "-m", "biradon.cli", "vertices", "--case", "deg"],
                         capture_output=True, text=True, check=True)
    assert json.loads(out.stdout)["results"]["case"] == "degenerate"
