"""Command line interface: ``tdcfem run``, ``tdcfem list`` and ``tdcfem verify``."""

import argparse
import logging
import math
import sys

from .cases import CASES
from .config import load_spec
from .harness import CaseSpec, run_case


def _option(text):
    key, sep, val = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected key=value, got {text!r}")
    try:
        return key, float(val)
    except ValueError:
        return key, val


def build_parser():
    parser = argparse.ArgumentParser(prog="tdcfem", description="Convergence studies for hyperelastic membranes and ropes.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run a convergence study")
    run.add_argument("--config", help="INI run file; command line flags override its values")
    run.add_argument("--case", choices=sorted(CASES))
    run.add_argument("--method", choices=("surface", "trace"))
    run.add_argument("--order", type=int, dest="p", help="element order p")
    run.add_argument("--levels", type=int, help="number of refinement levels")
    run.add_argument("--ladder", type=lambda s: tuple(int(v) for v in s.split(",")),
                     help="explicit resolutions, e.g. 2,4,8")
    run.add_argument("--rho", type=float, help="Trace FEM stabilization scale (default 1000/h)")
    run.add_argument("--load-steps", type=int)
    run.add_argument("--tol", type=float, dest="tol_residual")
    run.add_argument("--max-iter", type=int)
    run.add_argument("--reference", type=float, help="override the reference energy")
    run.add_argument("--option", type=_option, action="append", default=[], metavar="KEY=VALUE",
                     help="case option, e.g. lame=3d")
    run.add_argument("--out", help="output directory for convergence.csv, run.log and VTK files")
    run.add_argument("--no-vtk", action="store_true")
    run.add_argument("--no-time", action="store_true", help="write 0 in the seconds column (bit-reproducible CSV)")

    sub.add_parser("list", help="list the available cases")
    sub.add_parser("verify", help="run the property and oracle checks")
    return parser


def _spec_from_args(args):
    fields = {k: getattr(args, k) for k in ("case", "method", "p", "levels", "ladder", "rho", "load_steps",
                                            "tol_residual", "max_iter", "reference", "out")}
    fields["options"] = dict(args.option) or None
    if args.no_vtk:
        fields["vtk"] = False
    if args.no_time:
        fields["record_time"] = False
    if args.config:
        return load_spec(args.config, **fields)
    if args.case is None:
        raise SystemExit("tdcfem run: --case is required without --config")
    return CaseSpec(**{k: v for k, v in fields.items() if v is not None})


def _fmt(v):
    return "-" if isinstance(v, float) and math.isnan(v) else f"{v:.6e}"


def cmd_run(args):
    try:
        spec = _spec_from_args(args)
    except (ValueError, KeyError) as exc:
        print(f"tdcfem run: {exc}", file=sys.stderr)
        return 2
    record = run_case(spec)
    print(f"{'h':>12} {'n_dof':>7} {'energy':>22} {'energy_err':>12} {'residual_err':>12} {'iters':>5} status")
    for r in record.rows:
        print(f"{r.h:12.5e} {r.n_dof:7d} {r.energy:22.15e} {_fmt(r.energy_error):>12} "
              f"{_fmt(r.residual_error):>12} {r.newton_iters:5d} {r.status}")
    print(f"energy slope {record.energy_slope:.3f}  residual slope {record.residual_slope:.3f}")
    return 0 if all(r.status == "ok" for r in record.rows) else 1


def cmd_list(args):
    for c in CASES.values():
        ref = f"{c.reference:.13g} ({c.provenance})" if c.reference is not None else "none"
        print(f"{c.case_id:18s} {'/'.join(c.methods):14s} ladder {','.join(map(str, c.ladder)):12s} "
              f"reference {ref}  {c.description}")
    return 0


def cmd_verify(args):
    from .properties import run_all

    results = run_all()
    failed = [c.name for c in results if not c.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return 1 if failed else 0


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(message)s")
    return {"run": cmd_run, "list": cmd_list, "verify": cmd_verify}[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
