"""Quadratic C0 interior penalty finite elements for the fourth-order
Dirichlet boundary control problem on the unit square: KKT solve, a priori
convergence studies, residual a posteriori estimation and adaptive refinement.
"""
from .afem import AfemConfig, AfemTrace, dorfler_mark, run_afem
from .assembly import PenaltyConfig, assemble_ah, assemble_ah_parts, assemble_load, assemble_mass
from .error_metrics import ErrorReport, eoc, error_norms
from .estimator import EstimatorBreakdown, compute_estimator, efficiency_index
from .fe_space import DofMap, FeFunction, P2Space, build_dofmap
from .kkt import KktSolution, KktSystem, SolverError, build_kkt, solve_kkt
from .manufactured import ManufacturedCase, constant_case, example1, get_case
from .mesh import Mesh, build_unit_square, nvb_refine, uniform_refine
from .quadrature import edge_rule, tri_rule

__version__ = "0.1.0"
