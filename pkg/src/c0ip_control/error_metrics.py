"""Errors in the L2 norm, the mesh-dependent energy norm and the full norm.

energy^2 = sum_T ||Lap(w)||_T^2 + sum_e sigma/|e| ||[[dw/dn]]||_e^2 with
w = exact - u_h, edge sum over all edges; full^2 = energy^2 + l2^2.
"""
import math
from dataclasses import dataclass, field

import numpy as np

from .assembly import PenaltyConfig, edge_geometry, normal_derivative_jumps
from .fe_space import FeFunction
from .quadrature import edge_rule, tri_rule

__all__ = ["ErrorReport", "ConvergenceRow", "error_norms", "energy_norm", "eoc", "write_convergence_csv"]


@dataclass(frozen=True)
class ErrorReport:
    l2: float
    energy: float
    full_energy: float
    penalty: float = 0.0              # sigma-weighted jump part of energy^2
    per_element: np.ndarray = field(default=None, repr=False, compare=False)


@dataclass
class ConvergenceRow:
    level: int
    h: float
    ndof: int
    errors: dict
    orders: dict = field(default_factory=dict)


def error_norms(exact, fn: FeFunction, cfg: PenaltyConfig = PenaltyConfig(),
                degree: int = 10, edge_points: int = 5) -> ErrorReport:
    """``exact`` needs vectorised ``value``, ``grad`` and ``laplacian`` methods."""
    space = fn.space
    rule = tri_rule(degree)
    pts = space.physical_points(rule.points)
    x, y = pts[..., 0], pts[..., 1]
    wa = space.area[:, None] * rule.weights[None, :]

    diff = np.asarray(exact.value(x, y)) - fn.values_at(rule.points)
    l2_el = np.sum(wa * diff**2, axis=1)
    dlap = np.asarray(exact.laplacian(x, y)) - fn.laplacians()[:, None]
    lap_el = np.sum(wa * dlap**2, axis=1)

    geom = edge_geometry(space)
    erule = edge_rule(edge_points)
    jumps = -normal_derivative_jumps(space, fn.coeffs, erule.points, geom)
    # a smooth exact field has no interior jumps; on the boundary it adds grad . n
    bnd = np.flatnonzero(space.mesh.boundary_edge)
    if bnd.size:
        a = space.mesh.vertices[space.mesh.edges[bnd, 0]]
        b = space.mesh.vertices[space.mesh.edges[bnd, 1]]
        s = erule.points
        ex = a[:, None, 0] + s[None, :] * (b - a)[:, None, 0]
        ey = a[:, None, 1] + s[None, :] * (b - a)[:, None, 1]
        gx, gy = exact.grad(ex, ey)
        n = geom.normals[bnd]
        jumps[bnd] += np.asarray(gx) * n[:, None, 0] + np.asarray(gy) * n[:, None, 1]
    # sigma/|e| * int_e (.)^2 = sigma * sum_q w_q (.)^2
    jump_sq = cfg.sigma * (jumps**2 @ erule.weights)

    energy_sq = lap_el.sum() + jump_sq.sum()
    l2_sq = l2_el.sum()
    per_el = lap_el + l2_el
    return ErrorReport(
        l2=math.sqrt(l2_sq),
        energy=math.sqrt(energy_sq),
        full_energy=math.sqrt(energy_sq + l2_sq),
        penalty=float(jump_sq.sum()),
        per_element=per_el,
    )


def energy_norm(coeffs: np.ndarray, energy_matrix) -> float:
    """Discrete energy norm from the Gram matrix ``AhParts.energy``."""
    return math.sqrt(max(float(coeffs @ (energy_matrix @ coeffs)), 0.0))


def eoc(rows: list, key=lambda row: row.h, rtol: float = 1e-6, exact_tol: float = 1e-8) -> list:
    """Fill ``row.orders`` with log2 error ratios between consecutive rows.

    ``errors`` maps ``(var, norm)`` to a float. ``key`` gives the mesh size
    used for the ratio; a non-halving sequence raises ``ValueError``.
    Orders where both errors fall below ``exact_tol`` are reported as the
    string ``"exact"``.
    """
    if len(rows) < 2:
        raise ValueError("need at least two rows for convergence orders")
    for prev, cur in zip(rows, rows[1:]):
        ratio = key(prev) / key(cur)
        if abs(ratio - 2.0) > rtol * 2.0:
            raise ValueError(f"mesh size does not halve between levels {prev.level} and {cur.level}")
        for name, err in cur.errors.items():
            e0 = prev.errors[name]
            if e0 < exact_tol and err < exact_tol:
                cur.orders[name] = "exact"
            else:
                cur.orders[name] = math.log(e0 / err) / math.log(ratio)
    return rows


def _fmt(v) -> str:
    if v is None or v == "":
        return ""
    if isinstance(v, str):
        return v
    return f"{v:.6g}"


def write_convergence_csv(rows: list, path) -> None:
    """``level,h,ndof,var,norm,error,order`` with one line per (variable, norm)."""
    with open(path, "w") as fh:
        fh.write("level,h,ndof,var,norm,error,order\n")
        for row in rows:
            for (var, norm), err in row.errors.items():
                fh.write(f"{row.level},{_fmt(row.h)},{row.ndof},{var},{norm},{_fmt(err)},"
                         f"{_fmt(row.orders.get((var, norm), ''))}\n")
