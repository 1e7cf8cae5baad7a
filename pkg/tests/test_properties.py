import pytest

from tdcfem.properties import CHECKS, Check, run_all


@pytest.mark.parametrize("check", CHECKS, ids=lambda f: f.__name__)
def test_property(check):
    c = check()
    assert c.passed, c.line()


def test_run_all_reports_each_check():
    lines = []
    results = run_all(report=lines.append)
    assert len(results) == len(CHECKS) == len(lines)
    assert all(line.startswith(("PASS", "FAIL")) for line in lines)


def test_check_line_format():
    assert Check("x", 2.0, 1.0).line().startswith("FAIL x")
    assert Check("x", float("nan"), 1.0).passed is False
