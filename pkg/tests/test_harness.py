import csv
import math

import numpy as np
import pytest

from tdcfem.errors import MissingReference, UnsupportedOrder
from tdcfem.harness import CSV_HEADER, CaseSpec, fit_slope, energy_error, residual_error, run_case


def test_fit_slope_recovers_power_law():
    h = [0.5, 0.25, 0.125]
    assert fit_slope(h, [3 * x ** 4 for x in h]) == pytest.approx(4.0, abs=1e-12)
    assert math.isnan(fit_slope([0.5], [1.0]))


def test_energy_error_requires_reference():
    assert energy_error(1.5, 2.0) == 0.5
    with pytest.raises(MissingReference):
        energy_error(1.0, None)


def test_residual_error_requires_second_derivatives():
    with pytest.raises(UnsupportedOrder):
        residual_error(None, None, 1)


@pytest.mark.parametrize("kw", [dict(method="trace", case="tc3a"), dict(p=0), dict(ladder=(4, 2)), dict(levels=0)])
def test_spec_validation(kw):
    args = dict(case="tc2", method="surface", p=2)
    args.update(kw)
    with pytest.raises(ValueError):
        CaseSpec(**args)


def test_spec_ladder_defaults():
    assert CaseSpec("tc2").ladder == (4, 8, 16, 32)
    assert CaseSpec("tc2", levels=2).ladder == (4, 8)
    with pytest.raises(KeyError):
        CaseSpec("nope")


def test_run_case_writes_outputs(tmp_path):
    spec = CaseSpec("tc2", "surface", 2, ladder=(4, 8), out=str(tmp_path))
    rec = run_case(spec)
    with open(tmp_path / "convergence.csv") as fh:
        rows = list(csv.reader(fh))
    assert tuple(rows[0]) == CSV_HEADER
    assert len(rows) == 3
    assert float(rows[2][4]) < float(rows[1][4])
    for name in ("run.log", "level0.vtk", "level1.vtk", "convergence.gp"):
        assert (tmp_path / name).stat().st_size > 0
    log = (tmp_path / "run.log").read_text()
    assert "level 1 n=8" in log and "length_factor" in log
    assert rec.rows[1].energy_error < rec.rows[0].energy_error


def test_csv_is_bit_reproducible_without_timing(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        run_case(CaseSpec("tc2", "trace", 2, ladder=(4,), out=str(out), vtk=False, record_time=False))
    assert (a / "convergence.csv").read_bytes() == (b / "convergence.csv").read_bytes()


def test_level_failure_does_not_abort_ladder():
    rec = run_case(CaseSpec("tc2", "surface", 2, ladder=(4, 8), max_iter=1))
    assert [r.status for r in rec.rows] == ["NoConvergence", "NoConvergence"]
    assert np.isnan(rec.energy_slope)


def test_slopes_use_last_three_points():
    rec = run_case(CaseSpec("tc1", "surface", 2, ladder=(2, 4, 8, 16), residual=False))
    h = [r.h for r in rec.rows][-3:]
    e = [r.energy_error for r in rec.rows][-3:]
    assert rec.energy_slope == pytest.approx(fit_slope(h, e))


def test_missing_reference_leaves_nan_error():
    rec = run_case(CaseSpec("membrane-stretch", "surface", 2, ladder=(1,)))
    assert math.isnan(rec.rows[0].energy_error)
    assert rec.rows[0].extras["solution_error"] < 1e-12
