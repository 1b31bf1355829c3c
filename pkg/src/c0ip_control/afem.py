"""Adaptive loop SOLVE -> ESTIMATE -> MARK -> REFINE with Doerfler marking."""
import logging
from dataclasses import dataclass, field

import numpy as np

from .assembly import PenaltyConfig
from .error_metrics import ErrorReport, error_norms
from .estimator import EstimatorBreakdown, compute_estimator, efficiency_index
from .fe_space import P2Space
from .kkt import SolverError, build_kkt, solve_kkt
from .manufactured import get_case
from .mesh import Mesh, build_unit_square, nvb_refine

__all__ = ["AfemConfig", "AfemLevel", "AfemTrace", "dorfler_mark", "run_afem", "loglog_slope"]

log = logging.getLogger(__name__)


def dorfler_mark(indicators, theta: float) -> np.ndarray:
    """Smallest prefix of the indicators, sorted descending, holding a
    ``theta`` share of their sum.

    ``indicators`` are the squared element contributions. Ties are broken by
    element index. Returns sorted triangle indices; an all-zero input gives
    an empty array, which the adaptive loop treats as convergence.
    """
    ind = np.asarray(indicators, dtype=float)
    if not 0.0 < theta <= 1.0:
        raise ValueError(f"theta must lie in (0, 1], got {theta}")
    if np.any(ind < 0) or not np.all(np.isfinite(ind)):
        raise ValueError("indicators must be finite and nonnegative")
    order = np.argsort(-ind, kind="stable")
    csum = np.cumsum(ind[order])
    if ind.size == 0 or csum[-1] == 0.0:
        return np.empty(0, dtype=np.int64)
    k = int(np.searchsorted(csum, theta * csum[-1], side="left")) + 1
    return np.sort(order[:min(k, ind.size)])


@dataclass
class AfemConfig:
    theta: float = 0.4
    max_levels: int = 50
    max_ndof: int = 100_000
    sigma: float = 20.0
    alpha: float = None
    case: str = "example1"
    n0: int = 4
    keep_meshes: bool = False
    eta_tol: float = 1e-9             # eta below this is roundoff: converged

    def __post_init__(self):
        if not 0.0 < self.theta < 1.0:
            raise ValueError(f"theta must lie in (0, 1), got {self.theta}")
        if self.max_levels < 1 or self.max_ndof < 1:
            raise ValueError("max_levels and max_ndof must be positive")


@dataclass
class AfemLevel:
    level: int
    ndof: int
    triangles: int
    estimator: EstimatorBreakdown
    errors: dict
    efficiency: float
    marked: int

    @property
    def total_error(self) -> float:
        return sum(r.full_energy for r in self.errors.values())


@dataclass
class AfemTrace:
    levels: list = field(default_factory=list)
    meshes: list = field(default_factory=list)
    converged: bool = False
    failure: str = None
    solution: object = None           # KktSolution of the last solved level

    def ndofs(self) -> np.ndarray:
        return np.array([lv.ndof for lv in self.levels], dtype=float)

    def etas(self) -> np.ndarray:
        return np.array([lv.estimator.total for lv in self.levels])

    def errors(self) -> np.ndarray:
        return np.array([lv.total_error for lv in self.levels])


def loglog_slope(ndof, values, last: int = 5) -> float:
    """Least-squares slope of ``log(values)`` against ``log(ndof)`` over the last levels."""
    x = np.log(np.asarray(ndof, dtype=float)[-last:])
    y = np.log(np.asarray(values, dtype=float)[-last:])
    return float(np.polyfit(x, y, 1)[0])


def solve_level(mesh: Mesh, case, cfg: PenaltyConfig):
    space = P2Space(mesh)
    system = build_kkt(space, cfg, case)
    sol = solve_kkt(system)
    est = compute_estimator(sol, case)
    errs = {name: error_norms(case.exact[name], fn, cfg) for name, fn in sol.fields().items()}
    return space, system, sol, est, errs


def run_afem(cfg: AfemConfig, mesh: Mesh = None) -> AfemTrace:
    case = get_case(cfg.case)
    if cfg.alpha is not None:
        case = case.with_alpha(cfg.alpha)
    pen = PenaltyConfig(cfg.sigma)
    mesh = mesh or build_unit_square(cfg.n0)
    trace = AfemTrace()
    for level in range(1, cfg.max_levels + 1):
        try:
            space, system, sol, est, errs = solve_level(mesh, case, pen)
        except SolverError as exc:
            trace.failure = str(exc)
            log.error("level %d: %s", level, exc)
            return trace
        trace.solution = sol
        if cfg.keep_meshes:
            trace.meshes.append(mesh)
        if est.total > cfg.eta_tol:
            marked = dorfler_mark(est.per_element, cfg.theta)
        else:
            marked = np.empty(0, dtype=np.int64)
        trace.levels.append(AfemLevel(level, system.size, mesh.n_triangles, est, errs,
                                      efficiency_index(est, errs), len(marked)))
        log.info("level %d ndof %d eta %.6g", level, system.size, est.total)
        if marked.size == 0:
            trace.converged = True
            break
        if system.size >= cfg.max_ndof or level == cfg.max_levels:
            break
        mesh = nvb_refine(mesh, marked)
    return trace
