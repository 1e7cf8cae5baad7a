"""Convergence-study driver: runs a case over a refinement ladder and records errors."""

import csv
import logging
import os
import time
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .cases import get_case
from .errors import MissingReference, TDCError, UnsupportedOrder
from .solver import newton_solve
from .vtk import write_result

log = logging.getLogger("tdcfem.harness")

CSV_HEADER = ("h", "n_dof", "p", "energy", "energy_error", "residual_error", "newton_iters", "seconds")


@dataclass
class CaseSpec:
    """Everything needed to reproduce one convergence study.

    ``ladder`` lists the resolutions ``n`` (strictly increasing); ``None``
    takes the case default, truncated to ``levels`` entries when given.
    Solver fields left at ``None`` keep the case defaults.  ``options``
    are case-specific switches (``lame``, ``plane_cable_fraction``).
    """

    case: str
    method: str = "surface"
    p: int = 2
    ladder: Optional[tuple] = None
    levels: Optional[int] = None
    rho: Optional[float] = None
    load_steps: Optional[int] = None
    tol_residual: Optional[float] = None
    max_iter: Optional[int] = None
    line_search: Optional[bool] = None
    reference: Optional[float] = None
    options: dict = field(default_factory=dict)
    out: Optional[str] = None
    vtk: bool = True
    residual: bool = True
    record_time: bool = True

    def __post_init__(self):
        case = get_case(self.case)
        if self.method not in case.methods:
            raise ValueError(f"case {self.case} supports methods {case.methods}, not {self.method!r}")
        if not 1 <= self.p <= 8:
            raise ValueError(f"order p must be in 1..8, got {self.p}")
        if self.ladder is None:
            ladder = tuple(case.ladder)
            if self.levels is not None:
                if self.levels < 1:
                    raise ValueError("levels must be >= 1")
                base = ladder[0]
                ladder = tuple(base * 2**k for k in range(self.levels))
            self.ladder = ladder
        self.ladder = tuple(int(n) for n in self.ladder)
        if any(b <= a for a, b in zip(self.ladder, self.ladder[1:])):
            raise ValueError(f"ladder must be strictly refining, got {self.ladder}")

    @property
    def definition(self):
        return get_case(self.case)

    @property
    def reference_energy(self):
        return self.reference if self.reference is not None else self.definition.reference

    def build_options(self):
        opts = dict(self.options)
        if self.rho is not None:
            opts["rho"] = self.rho
        if self.load_steps is not None:
            opts["load_steps"] = self.load_steps
        return opts


@dataclass
class LevelResult:
    n: int
    h: float
    n_dof: int
    energy: float
    energy_error: float
    residual_error: float
    newton_iters: int
    seconds: float
    status: str = "ok"
    extras: dict = field(default_factory=dict)


@dataclass
class ConvergenceRecord:
    spec: CaseSpec
    rows: list = field(default_factory=list)

    def _slope(self, attr, last=3):
        pts = [(r.h, getattr(r, attr)) for r in self.rows if r.status == "ok"]
        pts = [(h, e) for h, e in pts if np.isfinite(e) and e > 0][-last:]
        return fit_slope([h for h, _ in pts], [e for _, e in pts])

    @property
    def energy_slope(self):
        return self._slope("energy_error")

    @property
    def residual_slope(self):
        return self._slope("residual_error")

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(CSV_HEADER)
            for r in self.rows:
                w.writerow([_fmt(r.h), r.n_dof, self.spec.p, _fmt(r.energy), _fmt(r.energy_error),
                            _fmt(r.residual_error), r.newton_iters, _fmt(r.seconds)])


def _fmt(v):
    return repr(float(v))


def fit_slope(h, err):
    """Least-squares slope of ``log err`` against ``log h`` (``nan`` with fewer than two points)."""
    if len(h) < 2:
        return float("nan")
    return float(np.polyfit(np.log(h), np.log(err), 1)[0])


def energy_error(energy, reference):
    """``|reference - energy|``; raises ``MissingReference`` without a reference."""
    if reference is None:
        raise MissingReference("no reference energy for this case")
    return abs(float(reference) - float(energy))


def residual_error(model, u, p):
    """Element-interior L2 norm of the strong-form equilibrium defect."""
    if p < 2:
        raise UnsupportedOrder("the residual error needs second derivatives (p >= 2)")
    return float(model.residual_error(u))


def run_level(spec, n, logger=None):
    """Build, solve (or interpolate) and measure one ladder level."""
    logger = logger or log
    t0 = time.perf_counter()
    problem = spec.definition.build(spec.method, spec.p, n, spec.build_options())
    model = problem.model
    iters = 0
    if problem.exact is not None:
        u = model.interpolate(problem.exact)
    else:
        cfg = problem.newton
        over = {k: getattr(spec, k) for k in ("tol_residual", "max_iter", "load_steps", "line_search")
                if getattr(spec, k) is not None}
        if over:
            cfg = replace(cfg, **over)
        res = newton_solve(model, cfg, logger=logger)
        u, iters = res.u, res.iterations
    energy = problem.energy_scale * model.energy(u)
    try:
        e_err = energy_error(energy, spec.reference_energy)
    except MissingReference:
        e_err = float("nan")
    r_err = float("nan")
    if spec.residual and spec.p >= 2 and problem.exact is None:
        r_err = residual_error(model, u, spec.p)
    extras = {}
    for name, fn in problem.extras.items():
        if name == "exact":
            extras["solution_error"] = float(np.max(np.abs(u - model.interpolate(fn))))
        else:
            extras[name] = float(fn(model, u))
    seconds = time.perf_counter() - t0 if spec.record_time else 0.0
    row = LevelResult(n=n, h=problem.h, n_dof=int(model.ndof), energy=energy, energy_error=e_err,
                      residual_error=r_err, newton_iters=iters, seconds=seconds, extras=extras)
    return row, model, u


def run_case(spec, logger=None):
    """Run every ladder level; failures are logged and recorded without aborting the ladder.

    With ``spec.out`` set, writes ``convergence.csv``, ``run.log`` and one
    VTK file per level into that directory.
    """
    logger = logger or log
    handler = None
    if spec.out:
        os.makedirs(spec.out, exist_ok=True)
        handler = logging.FileHandler(os.path.join(spec.out, "run.log"), mode="w")
        handler.setFormatter(logging.Formatter("%(name)s %(levelname)s %(message)s"))
        logging.getLogger("tdcfem").addHandler(handler)
        logging.getLogger("tdcfem").setLevel(logging.INFO)
    record = ConvergenceRecord(spec=spec)
    try:
        logger.info("case %s method %s p %d ladder %s", spec.case, spec.method, spec.p, spec.ladder)
        logger.info("columns: load_step iteration residual_inf energy")
        for level, n in enumerate(spec.ladder):
            try:
                row, model, u = run_level(spec, n, logger)
            except (TDCError, np.linalg.LinAlgError) as exc:
                logger.error("level %d (n=%d) failed: %s: %s", level, n, type(exc).__name__, exc)
                record.rows.append(LevelResult(n=n, h=float("nan"), n_dof=0, energy=float("nan"),
                                               energy_error=float("nan"), residual_error=float("nan"),
                                               newton_iters=0, seconds=0.0, status=type(exc).__name__))
                continue
            record.rows.append(row)
            logger.info("level %d n=%d h=%.6g dofs=%d energy=%.16e energy_error=%.3e residual_error=%.3e %s",
                        level, n, row.h, row.n_dof, row.energy, row.energy_error, row.residual_error,
                        " ".join(f"{k}={v:.16g}" for k, v in row.extras.items()))
            if spec.out and spec.vtk:
                write_result(os.path.join(spec.out, f"level{level}.vtk"), model, u)
        logger.info("energy slope %.3f residual slope %.3f", record.energy_slope, record.residual_slope)
        if spec.out:
            record.write_csv(os.path.join(spec.out, "convergence.csv"))
            write_plot_script(os.path.join(spec.out, "convergence.gp"))
    finally:
        if handler is not None:
            logging.getLogger("tdcfem").removeHandler(handler)
            handler.close()
    return record


def write_plot_script(path):
    """Gnuplot script for the log-log error plot of ``convergence.csv``."""
    with open(path, "w") as fh:
        fh.write("set datafile separator ','\nset logscale xy\nset key autotitle columnhead\n"
                 "set xlabel 'h'\nset ylabel 'error'\n"
                 "plot 'convergence.csv' using 1:5 with linespoints title 'energy error', \\\n"
                 "     '' using 1:6 with linespoints title 'residual error'\n")
