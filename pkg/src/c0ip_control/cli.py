"""Command line front end: ``c0ip-control <uniform|adaptive> ...``.

Writes CSV/JSON data for plotting; no figures are rendered. Set
``C0IP_THREADS`` to cap the BLAS thread pools used by numpy/scipy.
"""
import argparse
import logging
import os
import sys
from contextlib import nullcontext
from pathlib import Path

from threadpoolctl import threadpool_limits

from .afem import AfemConfig, run_afem
from .assembly import PenaltyConfig, ratio_checks
from .fe_space import P2Space
from .kkt import SolverError, write_solution_csv
from .manufactured import CASES, get_case
from .mesh import build_unit_square, write_mesh
from .report import (VARIABLES, adaptive_summary, uniform_study, uniform_summary,
                     write_estimator_csv, write_summary, write_trace_csv)
from .error_metrics import write_convergence_csv

log = logging.getLogger("c0ip_control")


def _theta(text):
    v = float(text)
    if not 0.0 < v < 1.0:
        raise argparse.ArgumentTypeError(f"theta must lie in (0, 1), got {text}")
    return v


def _positive(kind, lower=0.0, inclusive=False):
    def parse(text):
        v = kind(text)
        if v < lower or (v == lower and not inclusive):
            op = ">=" if inclusive else ">"
            raise argparse.ArgumentTypeError(f"expected a value {op} {lower}, got {text}")
        return v
    return parse


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="c0ip-control",
        description="Quadratic C0 interior penalty FEM for fourth-order Dirichlet boundary control.")
    parser.add_argument("-v", "--verbose", action="store_true", help="progress messages on stderr")
    sub = parser.add_subparsers(dest="mode", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--case", required=True, choices=sorted(CASES), help="benchmark case")
    common.add_argument("--sigma", type=_positive(float, 1.0, inclusive=True), default=20.0,
                        help="penalty parameter, >= 1 (default 20)")
    common.add_argument("--alpha", type=_positive(float), default=None,
                        help="regularization weight (default: the case's own, 1)")
    common.add_argument("--n0", type=_positive(int), default=4, help="cells per side of the initial mesh")
    common.add_argument("--out", type=Path, default=Path("c0ip_out"), help="output directory")
    common.add_argument("--emit-mesh", action="store_true", help="write every level's mesh")
    common.add_argument("--dump-matrices", action="store_true",
                        help="write a_h, mass and KKT matrices as 'row col value' text")
    common.add_argument("--seed", type=int, default=0, help="seed for the randomized form checks")

    uni = sub.add_parser("uniform", parents=[common], help="convergence study on uniform refinements")
    uni.add_argument("--levels", type=_positive(int, 2, inclusive=True), default=5,
                     help="number of meshes, >= 2 (default 5)")

    ada = sub.add_parser("adaptive", parents=[common], help="SOLVE-ESTIMATE-MARK-REFINE loop")
    ada.add_argument("--theta", type=_theta, default=0.4, help="Doerfler bulk parameter in (0, 1)")
    ada.add_argument("--max-ndof", type=_positive(int), default=100_000, help="stop once unknowns reach this")
    ada.add_argument("--max-levels", type=_positive(int), default=50)
    return parser


def _print_tables(study, stream):
    for norm, title in (("energy", "energy norm"), ("l2", "L2 norm")):
        print(f"Errors and orders of convergence in {title} (sigma={study.sigma:g})", file=stream)
        head = f"{'h':>10}" + "".join(f"{v + ' error':>14}{'order':>9}" for v in VARIABLES)
        print(head, file=stream)
        for row in study.rows:
            line = f"{row.h:10.4g}"
            for v in VARIABLES:
                order = row.orders.get((v, norm), "")
                order = order if isinstance(order, str) else f"{order:.4f}"
                line += f"{row.errors[(v, norm)]:14.6g}{order:>9}"
            print(line, file=stream)
        print(file=stream)


def _case(args):
    case = get_case(args.case)
    return case.with_alpha(args.alpha) if args.alpha is not None else case


def _checks(args):
    coer, cont = ratio_checks(P2Space(build_unit_square(args.n0)), PenaltyConfig(args.sigma), seed=args.seed)
    return {"seed": args.seed, "coercivity_min": float(f"{coer:.6g}"), "continuity_max": float(f"{cont:.6g}")}


def cmd_uniform(args) -> int:
    case = _case(args)
    out = args.out
    try:
        study = uniform_study(case, args.levels, args.n0, args.sigma, out, args.emit_mesh, args.dump_matrices)
    except SolverError as exc:
        print(f"c0ip-control: solver failure: {exc}", file=sys.stderr)
        return 1
    write_convergence_csv(study.rows, out / "convergence.csv")
    write_estimator_csv(study, out / "estimator.csv")
    write_solution_csv(study.levels[-1].solution, out / "solution.csv")
    summary = uniform_summary(study)
    summary["checks"] = _checks(args)
    write_summary(summary, out / "summary.json")
    _print_tables(study, sys.stdout)
    return 0


def cmd_adaptive(args) -> int:
    case = _case(args)
    out = args.out
    cfg = AfemConfig(theta=args.theta, max_levels=args.max_levels, max_ndof=args.max_ndof,
                     sigma=args.sigma, alpha=args.alpha, case=args.case, n0=args.n0,
                     keep_meshes=args.emit_mesh)
    trace = run_afem(cfg)
    write_trace_csv(trace, out / "afem_trace.csv")
    if trace.solution is not None:
        write_solution_csv(trace.solution, out / "solution.csv")
    for k, mesh in enumerate(trace.meshes, start=1):
        write_mesh(mesh, out / f"mesh_{k:02d}.txt")
    summary = adaptive_summary(trace, case, args.sigma, args.theta)
    summary["checks"] = _checks(args)
    write_summary(summary, out / "summary.json")

    print(f"{'level':>5}{'ndof':>9}{'eta':>14}{'error':>14}{'index':>10}{'marked':>8}")
    for lv in trace.levels:
        idx = "undefined" if lv.efficiency is None else f"{lv.efficiency:.4g}"
        print(f"{lv.level:5d}{lv.ndof:9d}{lv.estimator.total:14.6g}{lv.total_error:14.6g}{idx:>10}{lv.marked:8d}")
    if trace.converged:
        print("converged: all indicators vanish")
    slope = summary["slope"]
    if slope["eta"] is not None:
        print(f"log-log slope vs ndof: eta {slope['eta']:.4g}, error {slope['error']}")
    if trace.failure:
        print(f"c0ip-control: solver failure: {trace.failure}", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    threads = os.environ.get("C0IP_THREADS")
    if threads and not (threads.isdigit() and int(threads) > 0):
        parser.error(f"C0IP_THREADS must be a positive integer, got {threads!r}")
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    args.out.mkdir(parents=True, exist_ok=True)
    limit = threadpool_limits(limits=int(threads)) if threads else nullcontext()
    with limit:
        return cmd_uniform(args) if args.mode == "uniform" else cmd_adaptive(args)


if __name__ == "__main__":
    sys.exit(main())
