"""CLI subcommands, exit codes, and output determinism."""

import json

import pytest

from cellseq.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr().out
    return code, out


def test_validate_builtin(capsys):
    code, out = run(capsys, "validate", "torus2")
    assert code == 0
    assert json.loads(out)["ok"]


def test_validate_rule_file(tmp_path, capsys):
    path = tmp_path / "rule.json"
    assert main(["example", "torus2", "--dump", str(path), "--out", str(tmp_path / "e.json")]) == 0
    code, out = run(capsys, "validate", str(path))
    assert code == 0 and json.loads(out)["ok"]


def test_validate_failure_exit_code(tmp_path, capsys):
    path = tmp_path / "rule.json"
    main(["example", "torus2", "--dump", str(path), "--out", str(tmp_path / "e.json")])
    data = json.loads(path.read_text())
    edge = next(e["id"] for e in data["refined"]["cells"] if e["dim"] == 1)
    vertex = next(e["id"] for e in data["base"]["cells"] if e["dim"] == 0)
    data["image"][edge] = vertex
    path.write_text(json.dumps(data))
    code, out = run(capsys, "validate", str(path))
    assert code == 1
    assert not json.loads(out)["ok"]


def test_usage_error_exit_code(capsys):
    assert main(["no-such-command"]) == 2
    assert main([]) == 2


def test_iterate_counts(capsys):
    code, out = run(capsys, "iterate", "torus2", "--level", "3")
    assert code == 0
    data = json.loads(out)
    assert data["chamber_counts"] == {"0": 4, "1": 16, "2": 64, "3": 256}
    assert data["degree"] == 4


def test_iterate_cells_and_adjacency(tmp_path, capsys):
    code, out = run(capsys, "iterate", "torus2", "--level", "1", "--emit", "cells")
    assert code == 0
    data = json.loads(out)
    assert len(data["cells"]) == 64
    dot = tmp_path / "adj.dot"
    code, _ = run(capsys, "iterate", "torus2", "--level", "1", "--emit", "adjacency", "--out", str(dot))
    assert code == 0
    assert dot.read_text().startswith("graph level1")


def test_visual_report(capsys):
    code, out = run(
        capsys, "visual", "torus2", "--lambda", "2", "--depth", "5",
        "--sample", "vertices:2", "--cell-levels", "2",
    )
    assert code == 0
    data = json.loads(out)
    assert data["metric_ok"] and data["dominated"]
    assert data["c_meas"] > 0
    assert "cell_metric" in data


def test_diagnose_qv(capsys):
    code, out = run(capsys, "diagnose", "torus2", "--suite", "qv", "--max-level", "3")
    assert code == 0
    data = json.loads(out)
    assert abs(data["qv"]["lambda_sep"] - 0.7071067811865475) < 1e-12


def test_diagnose_cxc_and_bqs(capsys):
    code, out = run(capsys, "diagnose", "torus2", "--suite", "cxc", "--max-level", "3")
    assert code == 0
    assert json.loads(out)["cxc"]["degree_max"] == 1
    code, out = run(capsys, "diagnose", "torus2", "--suite", "bqs", "--max-level", "3")
    assert code == 0
    lo, hi = json.loads(out)["bqs"]["ratio_range"]
    assert 0.25 <= lo <= hi <= 4.0


def test_export_mesh_and_cpcf(tmp_path, capsys):
    csv = tmp_path / "mesh.csv"
    code, _ = run(capsys, "export", "torus2", "--what", "mesh", "--level", "3", "--out", str(csv))
    assert code == 0
    assert csv.read_text().splitlines()[0] == "level,mesh,min_chamber_diam,n_chambers"
    code, out = run(capsys, "export", "pillow", "--what", "cpcf")
    assert code == 0
    data = json.loads(out)
    assert len(data["postcritical"]) == 4


def test_determinism_byte_identical(capsys):
    outputs = []
    for _ in range(2):
        code, out = run(capsys, "diagnose", "torus2", "--suite", "qv", "--max-level", "2")
        assert code == 0
        outputs.append(out)
    assert outputs[0] == outputs[1]
    outputs = []
    for _ in range(2):
        code, out = run(
            capsys, "visual", "torus2", "--depth", "4", "--sample", "vertices:2"
        )
        assert code == 0
        outputs.append(out)
    assert outputs[0] == outputs[1]


def test_diagnose_csv_scatter(tmp_path, capsys):
    csv = tmp_path / "scatter.csv"
    code, _ = run(
        capsys, "diagnose", "torus2", "--suite", "bqs", "--max-level", "2",
        "--csv", str(csv),
    )
    assert code == 0
    lines = csv.read_text().splitlines()
    assert lines[0] == "level,t,r" and len(lines) > 10
