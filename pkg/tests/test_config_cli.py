import csv

import pytest

from tdcfem.cli import main
from tdcfem.config import dump_spec, load_spec, read_config
from tdcfem.harness import CaseSpec


def test_config_roundtrip(tmp_path):
    spec = CaseSpec("tc4", "surface", 3, ladder=(2, 4), load_steps=5, tol_residual=1e-9,
                    options={"lame": "3d", "plane_cable_fraction": 0.5}, out="res", record_time=False)
    dump_spec(spec, tmp_path / "run.ini")
    back = load_spec(tmp_path / "run.ini")
    assert back == spec


def test_flags_override_file(tmp_path):
    (tmp_path / "run.ini").write_text("[case]\ncase = tc2\nmethod = trace\np = 2\nladder = 4,8\n[trace]\nrho = 10\n")
    spec = load_spec(tmp_path / "run.ini", p=3, rho=None)
    assert (spec.case, spec.method, spec.p, spec.ladder, spec.rho) == ("tc2", "trace", 3, (4, 8), 10.0)


def test_config_rejects_unknown_keys(tmp_path):
    (tmp_path / "bad.ini").write_text("[case]\ncase = tc2\ncolour = blue\n")
    with pytest.raises(ValueError):
        read_config(tmp_path / "bad.ini")
    (tmp_path / "bad2.ini").write_text("[weird]\nx = 1\n")
    with pytest.raises(ValueError):
        read_config(tmp_path / "bad2.ini")


def test_cli_list(capsys):
    assert main(["list"]) == 0
    out = capsys.readouterr().out
    for case in ("tc1", "tc2", "tc3a", "tc3b", "tc4"):
        assert case in out


def test_cli_run(tmp_path, capsys):
    out = tmp_path / "o"
    code = main(["run", "--case", "tc2", "--method", "trace", "--order", "2", "--levels", "2", "--rho", "500",
                 "--out", str(out), "--no-vtk", "--no-time"])
    assert code == 0
    with open(out / "convergence.csv") as fh:
        rows = list(csv.DictReader(fh))
    assert len(rows) == 2 and rows[0]["seconds"] == "0.0"
    assert "energy slope" in capsys.readouterr().out


def test_cli_run_with_config(tmp_path):
    (tmp_path / "run.ini").write_text("[case]\ncase = membrane-stretch\np = 1\nladder = 1\n[output]\nvtk = false\n")
    assert main(["run", "--config", str(tmp_path / "run.ini"), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "convergence.csv").exists()
    assert not (tmp_path / "o" / "level0.vtk").exists()


def test_cli_rejects_bad_input(capsys):
    with pytest.raises(SystemExit):
        main(["run", "--case", "unknown"])
    assert main(["run", "--case", "tc3a", "--method", "trace"]) == 2


def test_cli_verify(capsys):
    assert main(["verify"]) == 0
    assert "12/12 checks passed" in capsys.readouterr().out
