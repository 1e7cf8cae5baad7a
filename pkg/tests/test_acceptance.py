"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -s``; skip with
``pytest -m "not acceptance"``.  Runtimes are wall-clock on the test
machine.
"""

import time
from functools import lru_cache

import pytest

from tdcfem import cases
from tdcfem.harness import CaseSpec, run_case
from tdcfem.properties import (check_almansi_pushforward, check_divergence_theorem, check_dual_representation,
                               check_dual_route_divergence, check_energy_conjugacy, check_projector_algebra,
                               check_residual_is_gradient, check_rigid_body, check_slip_equals_clamp,
                               check_stabilization_kernel, check_stretch_formulas, check_tangent_fd)

pytestmark = pytest.mark.acceptance

REPORT = []


def report(criterion, ok, detail):
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion}: {detail}"
    REPORT.append(line)
    print(line)
    return ok


@lru_cache(maxsize=None)
def study(case, method, p, ladder, residual=True, reference=None, options=()):
    """Cached convergence study with its wall-clock time."""
    t0 = time.perf_counter()
    rec = run_case(CaseSpec(case, method, p, ladder=ladder, residual=residual, reference=reference,
                            options=dict(options)))
    return rec, time.perf_counter() - t0


def slopes(rec, attr="energy_error"):
    return rec.energy_slope if attr == "energy_error" else rec.residual_slope


def _fmt_slopes(items):
    return ", ".join(f"{k}={v:.2f}" for k, v in items)


# ---------------------------------------------------------------- TC1

TC1_SURFACE = (2, 4, 8, 16)
TC1_TRACE = (2, 4, 8)


def _tc1(method, p):
    return study("tc1", method, p, TC1_SURFACE if method == "surface" else TC1_TRACE, residual=False)


def test_tc1_energy():
    out = {}
    for method, tol in (("surface", 1e-9), ("trace", 1e-7)):
        t = sum(_tc1(method, p)[1] for p in (1, 2, 3, 4))
        err = _tc1(method, 4)[0].rows[-1].energy_error
        out[method] = (err, tol, t)
    ok = all(e <= tol and t <= 120 for e, tol, t in out.values())
    detail = "; ".join(f"{m} p=4 |de|={e:.2e} (tol {tol:.0e}), all orders {t:.0f}s" for m, (e, tol, t) in out.items())
    assert report(1, ok, detail)


def test_tc1_rates():
    ok, items = True, []
    for method in ("surface", "trace"):
        for p in (1, 2, 3, 4):
            s = slopes(_tc1(method, p)[0])
            need = p + 1.7 if method == "surface" and p % 2 == 0 else p + 0.7
            if p <= 3 or method == "surface":
                ok &= s >= need
            items.append((f"{method[0]}{p}", s))
    assert report(2, ok, "energy slopes " + _fmt_slopes(items))


# ---------------------------------------------------------------- TC2

def test_tc2_solve():
    t0 = time.perf_counter()
    rec_s, _ = study("tc2", "surface", 4, (256,), residual=False)
    rec_t, _ = study("tc2", "trace", 4, (20, 40), residual=False)
    elapsed = time.perf_counter() - t0
    lf = cases.TC2_LENGTH_FACTOR
    s = rec_s.rows[-1]
    ds = (s.energy_error, abs(s.extras["length_factor"] - lf))
    dt = [(r.energy_error, abs(r.extras["length_factor"] - lf)) for r in rec_t.rows]
    ok = max(ds) <= 1e-8 and all(max(d) <= 1e-6 for d in dt) and elapsed <= 300
    detail = (f"surface n=256 |de|={ds[0]:.1e} |dlf|={ds[1]:.1e}; trace 40x20 |de|={dt[0][0]:.1e} "
              f"|dlf|={dt[0][1]:.1e}, 80x40 |de|={dt[1][0]:.1e} |dlf|={dt[1][1]:.1e}; {elapsed:.0f}s")
    assert report(3, ok, detail)


def tc2_ladder(method, p):
    if method == "surface":
        return (4, 8, 16, 32)
    # n=4 is pre-asymptotic for the Trace FEM; p=4 reaches its round-off floor beyond n=16
    return (4, 8, 16) if p == 4 else (8, 16, 32)


def test_tc2_rates():
    ok, items = True, []
    for method in ("surface", "trace"):
        for p in (1, 2, 3, 4):
            rec, _ = study("tc2", method, p, tc2_ladder(method, p))
            se = slopes(rec)
            need = p + 1.7 if method == "surface" and p % 2 == 0 else p + 0.7
            ok &= se >= need
            items.append((f"{method[0]}{p}.e", se))
            if p >= 2:
                sr = slopes(rec, "residual_error")
                ok &= sr >= p - 1.3
                items.append((f"{method[0]}{p}.res", sr))
    assert report(4, ok, "slopes " + _fmt_slopes(items))


# ---------------------------------------------------------------- TC3

TC3_LADDER = {1: (2, 4, 8, 16), 2: (2, 4, 8, 16), 3: (2, 4, 8, 16), 4: (2, 4, 8)}


def test_tc3():
    ok, items = True, []
    for p in (2, 3):
        rec, _ = study("tc3a", "surface", p, TC3_LADDER[p])
        se, sr = slopes(rec), slopes(rec, "residual_error")
        ok &= se >= p + 0.7 and sr >= p - 1.3
        items += [(f"A{p}.e", se), (f"A{p}.res", sr)]
    for p in (1, 2, 4):
        rec, _ = study("tc3b", "surface", p, TC3_LADDER[p], residual=False)
        se = slopes(rec)
        ok &= se >= p + 0.7 if p <= 2 else se <= p
        items.append((f"B{p}.e", se))
    spread = {v: abs(a - b) for v, (a, b) in (("A", cases.TC3A_OVERKILL), ("B", cases.TC3B_OVERKILL))}
    ok &= all(d <= 1e-11 for d in spread.values())
    detail = "slopes " + _fmt_slopes(items) + "; reference spread " + ", ".join(
        f"{v}={d:.1e}" for v, d in spread.items())
    assert report(5, ok, detail)


# ---------------------------------------------------------------- TC4

TC4_LADDER = (2, 4, 8)


def test_tc4():
    t0 = time.perf_counter()
    ok, items = True, []
    energies = {}
    for p in (1, 2, 3, 4):
        rec, _ = study("tc4", "surface", p, TC4_LADDER, residual=False, reference=cases.TC4_OVERKILL)
        ok &= all(r.status == "ok" for r in rec.rows)
        se = slopes(rec)
        energies[p] = rec.rows[-1].energy
        # optimal for the low orders; the cable kinks cap the rate of the higher ones
        ok &= se >= p + 0.7 if p <= 2 else 0 < se < p + 1
        items.append((f"p{p}", se))
    elapsed = time.perf_counter() - t0
    rel = abs(energies[4] - cases.TC4_REFERENCE) / cases.TC4_REFERENCE
    ok &= rel <= 1e-2 and elapsed <= 900
    detail = (f"energy p=4 n=8 {energies[4]:.6f}, relative deviation {rel:.2e} (tol 1e-2); slopes vs overkill "
              + _fmt_slopes(items) + f"; {elapsed:.0f}s")
    assert report(6, ok, detail)


def test_tc4_lame_variant_reported():
    rec, _ = study("tc4", "surface", 2, (4,), residual=False, options=(("lame", "3d"),))
    rel = abs(rec.rows[-1].energy - cases.TC4_REFERENCE) / cases.TC4_REFERENCE
    print(f"INFO TC4 with three-dimensional Lame constant: energy {rec.rows[-1].energy:.6f}, relative {rel:.2e}")
    assert rec.rows[-1].status == "ok"


# ---------------------------------------------------------------- properties and oracles

PROPERTY_CHECKS = (check_projector_algebra, check_dual_representation, check_stretch_formulas,
                   check_almansi_pushforward, check_energy_conjugacy, check_dual_route_divergence,
                   check_rigid_body, check_divergence_theorem)


def test_property_suites():
    t0 = time.perf_counter()
    results = [fn() for fn in PROPERTY_CHECKS]
    elapsed = time.perf_counter() - t0
    failed = [c.line() for c in results if not c.passed]
    ok = not failed and elapsed <= 120
    assert report(7, ok, f"{len(results) - len(failed)}/{len(results)} passed in {elapsed:.1f}s "
                         + ("; " + "; ".join(failed) if failed else ""))


def test_discrete_oracles():
    results = [fn() for fn in (check_residual_is_gradient, check_tangent_fd, check_slip_equals_clamp,
                               check_stabilization_kernel)]
    ok = all(c.passed for c in results)
    # energy sensitivity to the stabilization scale across [1000 h, 1000 / h]
    worst = 0.0
    for p, n in ((2, 8), (3, 8), (4, 8)):
        h = 0.5 / n
        base = study("tc2", "trace", p, (n,), residual=False)[0].rows[0]
        for rho in (1000 * h, 1000 / h):
            e = run_case(CaseSpec("tc2", "trace", p, ladder=(n,), rho=rho, residual=False)).rows[0].energy
            worst = max(worst, abs(e - base.energy) / base.energy_error)
    ok &= worst < 0.1
    detail = "; ".join(f"{c.name} {c.value:.1e}" for c in results) + f"; rho sensitivity {worst:.2f} x energy error"
    assert report(8, ok, detail)
