"""Residual a posteriori estimator for the discrete optimality system.

Components (squared sums over elements or edges):

    eta1: h_T^2 ||f||_T                 eta2: h_T^2 ||u_h - u_d||_T
    eta3..5: |e|^1/2 ||[[Lap v_h]]||_e for v = q, u, phi on interior edges
    eta6..8: |e|^-1/2 ||[[dv_h/dn]]||_e for v = q, u, phi on all edges

Element indicators take the volume terms, half of every interior-edge term
and the whole of every boundary-edge term.
"""
from dataclasses import dataclass, field

import numpy as np

from .assembly import edge_geometry, laplacian_jumps, normal_derivative_jumps
from .kkt import KktSolution
from .manufactured import ManufacturedCase
from .quadrature import edge_rule, tri_rule

__all__ = ["EstimatorBreakdown", "compute_estimator", "efficiency_index", "data_oscillation",
           "ESTIMATOR_CSV_HEADER", "estimator_csv_row"]


@dataclass(frozen=True)
class EstimatorBreakdown:
    eta: np.ndarray                    # eta1..eta8
    per_element: np.ndarray = field(repr=False)
    total: float

    def __getattr__(self, name):
        if name.startswith("eta") and name[3:].isdigit():
            k = int(name[3:])
            if 1 <= k <= 8:
                return float(self.eta[k - 1])
        raise AttributeError(name)


def _volume_sq(space, g, degree):
    rule = tri_rule(degree)
    pts = space.physical_points(rule.points)
    vals = g(pts[..., 0], pts[..., 1])
    return space.area * (np.asarray(vals) ** 2 @ rule.weights)


def compute_estimator(sol: KktSolution, case: ManufacturedCase, degree: int = 10,
                      edge_points: int = 3) -> EstimatorBreakdown:
    space = sol.u.space
    mesh = space.mesh
    h4 = mesh.diameters**4
    rule = tri_rule(degree)
    pts = space.physical_points(rule.points)
    x, y = pts[..., 0], pts[..., 1]

    eta1_T = h4 * _volume_sq(space, case.f, degree)
    resid = sol.u.values_at(rule.points) - np.asarray(case.u_d(x, y))
    eta2_T = h4 * space.area * (resid**2 @ rule.weights)

    lengths = mesh.edge_lengths
    interior = ~mesh.boundary_edge
    geom = edge_geometry(space)
    erule = edge_rule(edge_points)
    lap_terms, dn_terms = [], []
    for fn in (sol.q, sol.u, sol.phi):
        # |e| * int_e jump^2 with a constant jump
        lj = laplacian_jumps(space, fn.coeffs)
        lap_terms.append(np.where(interior, lengths**2 * lj**2, 0.0))
        # |e|^-1 * int_e jump^2 = sum_q w_q jump^2
        nj = normal_derivative_jumps(space, fn.coeffs, erule.points, geom)
        dn_terms.append(nj**2 @ erule.weights)

    volume = [eta1_T, eta2_T]
    edge = lap_terms + dn_terms
    eta_sq = np.array([v.sum() for v in volume] + [e.sum() for e in edge])

    edge_sum = np.sum(edge, axis=0)
    share = np.where(interior, 0.5, 1.0) * edge_sum
    et = mesh.edge_tris
    per_el = eta1_T + eta2_T
    per_el = per_el + np.bincount(et[:, 0], weights=share, minlength=mesh.n_triangles)
    per_el = per_el + np.bincount(et[interior, 1], weights=share[interior], minlength=mesh.n_triangles)
    return EstimatorBreakdown(np.sqrt(eta_sq), per_el, float(np.sqrt(eta_sq.sum())))


def efficiency_index(est: EstimatorBreakdown, errs: dict, tol: float = 1e-8):
    """``eta / sum_v |||v - v_h|||_h``; ``None`` when the error vanishes.

    Errors at or below ``tol`` are solver roundoff (the constant case) and
    count as zero, the same threshold under which orders read "exact".
    """
    total = sum(r.full_energy for r in errs.values())
    if total <= tol:
        return None
    return est.total / total


def data_oscillation(space, case: ManufacturedCase, degree: int = 10) -> float:
    """``(sum_T h_T^4 (||f - mean f||_T^2 + ||u_d - mean u_d||_T^2))^1/2``."""
    rule = tri_rule(degree)
    pts = space.physical_points(rule.points)
    x, y = pts[..., 0], pts[..., 1]
    total = np.zeros(space.mesh.n_triangles)
    for g in (case.f, case.u_d):
        vals = np.broadcast_to(np.asarray(g(x, y), dtype=float), x.shape)
        mean = vals @ rule.weights
        total += space.area * ((vals - mean[:, None]) ** 2 @ rule.weights)
    return float(np.sqrt(np.sum(space.mesh.diameters**4 * total)))


ESTIMATOR_CSV_HEADER = ("level,ndof," + ",".join(f"eta{k}" for k in range(1, 9))
                        + ",eta_total,total_error,efficiency_index")


def estimator_csv_row(level: int, ndof: int, est: EstimatorBreakdown, total_error, index) -> str:
    fmt = lambda v: "undefined" if v is None else f"{v:.6g}"
    cells = [str(level), str(ndof)] + [fmt(v) for v in est.eta] + [fmt(est.total), fmt(total_error), fmt(index)]
    return ",".join(cells)
