import csv
import json

import pytest

from imexwave.cli import build_parser, config_from_args, main
from imexwave.fem import save_system_dir
from imexwave.sparse import SparseMatrix


def test_flags_override_config(tmp_path):
    cfg = tmp_path / "c.json"
    cfg.write_text(json.dumps({"scheme": "cn", "tau": 0.05, "disc": "disc:2"}))
    args = build_parser().parse_args(["run", "--config", str(cfg), "--scheme", "imex", "--gamma", "1,1,-2"])
    c = config_from_args(args)
    assert c.scheme == "imex" and c.tau == 0.05 and c.disc == "disc:2" and c.gamma == (1.0, 1.0, -2.0)


def test_bad_gamma_flag():
    with pytest.raises(SystemExit):
        build_parser().parse_args(["run", "--gamma", "1,2"])


def test_run_writes_summary(tmp_path, capsys):
    assert main(["run", "--disc", "interval:8", "--out", str(tmp_path), "--t-end", "0.2"]) == 0
    data = json.loads((tmp_path / "run.json").read_text())
    assert data["steps"] == 2 and data["error_vs_exact"] < 1
    assert "error_vs_exact" in capsys.readouterr().out


def test_converge_outputs(tmp_path):
    code = main(["converge", "--disc", "interval:8", "--scheme", "rimex", "--gamma", "1,1,-2",
                 "--tau-list", "0.1,0.05,0.025", "--out", str(tmp_path)])
    assert code == 0
    with open(tmp_path / "converge_rimex.csv", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 3 and rows[0]["observed_order"] == ""
    assert (tmp_path / "converge_rimex.svg").read_text().startswith("<?xml")
    assert json.loads((tmp_path / "converge_rimex.json").read_text())["scheme"] == "revised-imex"


def test_runtime_stability_snapshots(tmp_path):
    assert main(["runtime", "--disc", "interval:4", "--reference", "exact", "--target", "inf",
                 "--max-halvings", "1", "--out", str(tmp_path)]) == 0
    assert (tmp_path / "runtime.csv").exists()
    assert main(["stability", "--disc", "interval:16", "--problem", "example2", "--tau-list", "0.1,0.05",
                 "--t-end", "2", "--out", str(tmp_path)]) == 0
    lines = (tmp_path / "stability.csv").read_text().splitlines()
    assert lines[0] == "tau,stable,blowup_step,max_norm" and len(lines) == 3
    assert main(["snapshots", "--disc", "disc:1", "--problem", "example2", "--times", "0,0.2",
                 "--out", str(tmp_path)]) == 0
    assert len(list(tmp_path.glob("snapshot_rimex_*.vtk"))) == 2


def test_matrix_problem(tmp_path):
    I = SparseMatrix.identity(3)
    save_system_dir(tmp_path / "sys", I, I, u0=[1.0, 0.0, -1.0])
    assert main(["converge", "--problem", f"matrix:{tmp_path / 'sys'}", "--scheme", "cn",
                 "--tau-list", "0.1,0.05,0.025", "--out", str(tmp_path)]) == 0


def test_errors_exit_nonzero(tmp_path, capsys):
    assert main(["converge", "--reference", "refined:3", "--out", str(tmp_path)]) == 2
    assert "refinement factor" in capsys.readouterr().err
    assert main(["run", "--problem", f"matrix:{tmp_path / 'missing'}"]) == 2
