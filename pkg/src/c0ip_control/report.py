"""Uniform convergence studies and the files written by the command line.

All numbers go out with 6 significant digits. A run directory holds

    convergence.csv   level,h,ndof,var,norm,error,order      (uniform)
    estimator.csv     level,ndof,eta1..eta8,eta_total,...   (uniform)
    afem_trace.csv    the estimator columns plus marked,triangles (adaptive)
    solution.csv      dof,x,y,u,phi,q on the finest mesh
    summary.json      see SUMMARY_SCHEMA
"""
import json
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .assembly import PenaltyConfig, write_coo
from .error_metrics import ConvergenceRow, eoc
from .estimator import ESTIMATOR_CSV_HEADER, efficiency_index, estimator_csv_row
from .kkt import KktSolution, optimality_residuals
from .manufactured import ManufacturedCase
from .mesh import build_unit_square, uniform_refine, write_mesh
from .afem import AfemTrace, loglog_slope, solve_level

__all__ = ["UniformLevel", "UniformStudy", "uniform_study", "SUMMARY_SCHEMA", "uniform_summary",
           "adaptive_summary", "write_estimator_csv", "write_trace_csv", "write_summary"]

log = logging.getLogger(__name__)

VARIABLES = ("u", "phi", "q")

SUMMARY_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "c0ip-control run summary",
    "type": "object",
    "required": ["mode", "case", "levels", "slope", "efficiency_min", "efficiency_max"],
    "properties": {
        "mode": {"enum": ["uniform", "adaptive"]},
        "case": {"type": "string"},
        "levels": {"type": "integer", "minimum": 1},
        "slope": {
            "type": "object",
            "description": "log-log slope against total unknowns over the last levels (at most 5); "
                           "null when a quantity vanishes",
            "required": ["eta", "error"],
            "properties": {"eta": {"type": ["number", "null"]}, "error": {"type": ["number", "null"]}},
        },
        "efficiency_min": {"type": ["number", "null"]},
        "efficiency_max": {"type": ["number", "null"]},
        "sigma": {"type": "number"},
        "alpha": {"type": "number"},
        "theta": {"type": "number"},
        "ndof": {"type": "array", "items": {"type": "integer"}},
        "converged": {"type": "boolean"},
        "failure": {"type": ["string", "null"]},
    },
}


@dataclass(eq=False)
class UniformLevel:
    level: int
    n: int
    h: float
    ndof: int
    solution: KktSolution
    estimator: object
    errors: dict
    residuals: list = field(default_factory=list)

    @property
    def total_error(self) -> float:
        return sum(r.full_energy for r in self.errors.values())

    @property
    def efficiency(self):
        return efficiency_index(self.estimator, self.errors)


@dataclass(eq=False)
class UniformStudy:
    case: ManufacturedCase
    sigma: float
    levels: list
    rows: list


def uniform_study(case: ManufacturedCase, levels: int, n0: int = 4, sigma: float = 20.0,
                  out_dir=None, emit_mesh: bool = False, dump_matrices: bool = False) -> UniformStudy:
    """Solve on ``levels`` uniformly refined meshes starting from ``n0 x n0`` cells.

    Level ``k`` (1-based) has mesh size ``h = sqrt(2) / (n0 * 2**(k-1))``.
    """
    if levels < 2:
        raise ValueError("a convergence study needs at least 2 levels")
    cfg = PenaltyConfig(sigma)
    mesh = build_unit_square(n0)
    out, rows = [], []
    for k in range(1, levels + 1):
        if k > 1:
            mesh = uniform_refine(mesh)
        space, system, sol, est, errs = solve_level(mesh, case, cfg)
        lv = UniformLevel(k, n0 * 2 ** (k - 1), mesh.h, system.size, sol, est, errs,
                          optimality_residuals(system, sol))
        out.append(lv)
        log.info("level %d h=%.4g ndof=%d eta=%.6g", k, lv.h, lv.ndof, est.total)
        errors = {}
        for var in VARIABLES:
            errors[(var, "energy")] = errs[var].energy
            errors[(var, "l2")] = errs[var].l2
        rows.append(ConvergenceRow(k, lv.h, lv.ndof, errors))
        if out_dir is not None and emit_mesh:
            write_mesh(mesh, out_dir / f"mesh_{k:02d}.txt")
        if out_dir is not None and dump_matrices:
            write_coo(system.parts.ah, out_dir / f"ah_{k:02d}.coo")
            write_coo(system.mass, out_dir / f"mass_{k:02d}.coo")
            write_coo(system.matrix, out_dir / f"kkt_{k:02d}.coo")
    eoc(rows)
    return UniformStudy(case, sigma, out, rows)


def _finite_or_none(v):
    return None if v is None or not math.isfinite(v) else float(f"{v:.6g}")


def _slope(ndof, values):
    values = np.asarray(values, dtype=float)
    if len(values) < 2 or np.any(values <= 1e-8):
        return None
    return _finite_or_none(loglog_slope(ndof, values, last=min(5, len(values))))


def _efficiency_range(indices):
    vals = [v for v in indices if v is not None]
    if not vals:
        return None, None
    return _finite_or_none(min(vals)), _finite_or_none(max(vals))


def uniform_summary(study: UniformStudy) -> dict:
    ndof = [lv.ndof for lv in study.levels]
    lo, hi = _efficiency_range([lv.efficiency for lv in study.levels])
    return {
        "mode": "uniform",
        "case": study.case.name,
        "levels": len(study.levels),
        "slope": {"eta": _slope(ndof, [lv.estimator.total for lv in study.levels]),
                  "error": _slope(ndof, [lv.total_error for lv in study.levels])},
        "efficiency_min": lo,
        "efficiency_max": hi,
        "sigma": study.sigma,
        "alpha": study.case.alpha,
        "ndof": ndof,
    }


def adaptive_summary(trace: AfemTrace, case: ManufacturedCase, sigma: float, theta: float) -> dict:
    ndof = [lv.ndof for lv in trace.levels]
    lo, hi = _efficiency_range([lv.efficiency for lv in trace.levels])
    return {
        "mode": "adaptive",
        "case": case.name,
        "levels": len(trace.levels),
        "slope": {"eta": _slope(ndof, trace.etas()), "error": _slope(ndof, trace.errors())},
        "efficiency_min": lo,
        "efficiency_max": hi,
        "sigma": sigma,
        "alpha": case.alpha,
        "theta": theta,
        "ndof": ndof,
        "converged": trace.converged,
        "failure": trace.failure,
    }


def write_estimator_csv(study: UniformStudy, path) -> None:
    with open(path, "w") as fh:
        fh.write(ESTIMATOR_CSV_HEADER + "\n")
        for lv in study.levels:
            fh.write(estimator_csv_row(lv.level, lv.ndof, lv.estimator, lv.total_error, lv.efficiency) + "\n")


def write_trace_csv(trace: AfemTrace, path) -> None:
    with open(path, "w") as fh:
        fh.write(ESTIMATOR_CSV_HEADER + ",marked,triangles\n")
        for lv in trace.levels:
            row = estimator_csv_row(lv.level, lv.ndof, lv.estimator, lv.total_error, lv.efficiency)
            fh.write(f"{row},{lv.marked},{lv.triangles}\n")


def write_summary(summary: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
        fh.write("\n")
