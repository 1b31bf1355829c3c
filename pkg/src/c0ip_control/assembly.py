"""Assembly of the C0 interior penalty form, mass matrix and load vectors.

The bilinear form is kept in three pieces so that norms and estimators can
reuse them::

    a_h = volume + consistency + sigma * jump

with ``volume`` the broken Laplacian product, ``consistency`` the two
average/jump terms (entering with a minus sign, since the jump is the sum
of outward normal derivatives) and ``jump`` the unscaled penalty
``sum_e |e|^-1 int_e [[dp/dn]] [[dr/dn]]``. Edge sums run over interior
*and* boundary edges.

Edge orientation: ``n_e`` is the outward normal of ``mesh.edge_tris[e, 0]``
(the lower-indexed neighbour, called the minus side). On an interior edge
``[[dv/dn]] = (grad v_minus - grad v_plus) . n_e``; on a boundary edge it is
``grad v . n_e`` and the average of ``Laplacian v`` is its one-sided value.
"""
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .fe_space import P2Space, shape_gradients, shape_values
from .quadrature import edge_rule, tri_rule

__all__ = [
    "PenaltyConfig",
    "EdgeGeometry",
    "AhParts",
    "edge_geometry",
    "edge_side_traces",
    "normal_derivative_jumps",
    "laplacian_jumps",
    "assemble_ah_parts",
    "assemble_ah",
    "assemble_mass",
    "assemble_load",
    "apply_ah_to_function",
    "restrict",
    "write_coo",
    "ratio_checks",
]


@dataclass(frozen=True)
class PenaltyConfig:
    sigma: float = 20.0

    def __post_init__(self):
        if not self.sigma >= 1.0:
            raise ValueError(f"penalty parameter sigma must be >= 1, got {self.sigma}")


@dataclass(frozen=True, eq=False)
class EdgeGeometry:
    normals: np.ndarray
    lengths: np.ndarray


@dataclass(frozen=True, eq=False)
class AhParts:
    volume: sp.csr_matrix
    consistency: sp.csr_matrix
    jump: sp.csr_matrix
    sigma: float

    @property
    def ah(self) -> sp.csr_matrix:
        return _symmetrize(self.volume + self.consistency + self.sigma * self.jump)

    @property
    def energy(self) -> sp.csr_matrix:
        """Gram matrix of the discrete energy norm: volume + sigma * jump."""
        return _symmetrize(self.volume + self.sigma * self.jump)


def _symmetrize(m) -> sp.csr_matrix:
    # duplicate entries are summed in different orders for (i, j) and (j, i);
    # averaging makes the stored matrix symmetric bit for bit
    m = m.tocsr()
    return ((m + m.T) * 0.5).tocsr()


def edge_geometry(space: P2Space) -> EdgeGeometry:
    mesh = space.mesh
    a = mesh.vertices[mesh.edges[:, 0]]
    b = mesh.vertices[mesh.edges[:, 1]]
    d = b - a
    lengths = np.hypot(d[:, 0], d[:, 1])
    normals = np.column_stack([d[:, 1], -d[:, 0]]) / lengths[:, None]
    # flip so that n_e points away from the minus triangle
    centroid = mesh.vertices[mesh.triangles[mesh.edge_tris[:, 0]]].mean(axis=1)
    flip = np.einsum("ij,ij->i", normals, a - centroid) < 0.0
    normals[flip] *= -1.0
    return EdgeGeometry(normals, lengths)


def _edge_bary(space: P2Space, edges: np.ndarray, tris: np.ndarray, s: np.ndarray) -> np.ndarray:
    """Barycentric coordinates in ``tris`` of the points ``(1-s) a + s b``."""
    tv = space.mesh.triangles[tris]
    ev = space.mesh.edges[edges]
    bary = np.zeros((len(edges), len(s), 3))
    rows = np.arange(len(edges))
    ia = np.argmax(tv == ev[:, :1], axis=1)
    ib = np.argmax(tv == ev[:, 1:], axis=1)
    bary[rows, :, ia] = 1.0 - s
    bary[rows, :, ib] = s
    return bary


def edge_side_traces(space: P2Space, edges: np.ndarray, side: int, s: np.ndarray, geom: EdgeGeometry):
    """Normal derivatives (w.r.t. ``n_e``) of the local basis of one side.

    Returns ``(tris, dn, lap)`` with ``dn`` of shape ``(len(edges), Q, 6)``
    and ``lap`` of shape ``(len(edges), 6)``.
    """
    tris = space.mesh.edge_tris[edges, side]
    bary = _edge_bary(space, edges, tris, s)
    grads = shape_gradients(space.grad_lambda[tris], bary)
    dn = np.einsum("eqad,ed->eqa", grads, geom.normals[edges])
    return tris, dn, space.laplacians[tris]


def _split_edges(space: P2Space):
    interior = np.flatnonzero(~space.mesh.boundary_edge)
    boundary = np.flatnonzero(space.mesh.boundary_edge)
    return interior, boundary


def normal_derivative_jumps(space: P2Space, coeffs: np.ndarray, s: np.ndarray, geom=None) -> np.ndarray:
    """``[[dv/dn]]`` on every edge at edge parameters ``s``, shape ``(E, Q)``."""
    geom = geom or edge_geometry(space)
    cd = space.dofs.cell_dofs
    out = np.empty((space.mesh.n_edges, len(s)))
    interior, boundary = _split_edges(space)
    tm, dnm, _ = edge_side_traces(space, interior, 0, s, geom)
    tp, dnp, _ = edge_side_traces(space, interior, 1, s, geom)
    out[interior] = (np.einsum("eqa,ea->eq", dnm, coeffs[cd[tm]])
                     - np.einsum("eqa,ea->eq", dnp, coeffs[cd[tp]]))
    tb, dnb, _ = edge_side_traces(space, boundary, 0, s, geom)
    out[boundary] = np.einsum("eqa,ea->eq", dnb, coeffs[cd[tb]])
    return out


def laplacian_jumps(space: P2Space, coeffs: np.ndarray) -> np.ndarray:
    """``[[Laplacian v]] = lap_plus - lap_minus`` on interior edges; 0 on boundary edges."""
    lap = np.einsum("ma,ma->m", space.laplacians, coeffs[space.dofs.cell_dofs])
    et = space.mesh.edge_tris
    out = np.zeros(space.mesh.n_edges)
    interior = et[:, 1] >= 0
    out[interior] = lap[et[interior, 1]] - lap[et[interior, 0]]
    return out


def _coo(rows, cols, vals, n):
    return sp.coo_matrix((vals.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n)).tocsr()


def assemble_ah_parts(space: P2Space, cfg: PenaltyConfig = PenaltyConfig(), npoints: int = 3) -> AhParts:
    n = space.n_dofs
    cd = space.dofs.cell_dofs
    lap = space.laplacians
    vol_loc = space.area[:, None, None] * lap[:, :, None] * lap[:, None, :]
    volume = _coo(np.repeat(cd[:, :, None], 6, 2), np.repeat(cd[:, None, :], 6, 1), vol_loc, n)

    geom = edge_geometry(space)
    rule = edge_rule(npoints)
    s, w = rule.points, rule.weights
    interior, boundary = _split_edges(space)

    tm, dnm, lapm = edge_side_traces(space, interior, 0, s, geom)
    tp, dnp, lapp = edge_side_traces(space, interior, 1, s, geom)
    dofs_i = np.hstack([cd[tm], cd[tp]])
    jump_i = np.concatenate([dnm, -dnp], axis=2)          # (Ei, Q, 12)
    avg_i = 0.5 * np.hstack([lapm, lapp])                 # (Ei, 12)

    tb, dnb, lapb = edge_side_traces(space, boundary, 0, s, geom)
    dofs_b = cd[tb]

    cons_parts, jump_parts = [], []
    for dofs, jump, avg, edges in ((dofs_i, jump_i, avg_i, interior), (dofs_b, dnb, lapb, boundary)):
        length = geom.lengths[edges]
        mean_jump = np.einsum("q,eqa->ea", w, jump)
        c_loc = -length[:, None, None] * (avg[:, :, None] * mean_jump[:, None, :]
                                         + mean_jump[:, :, None] * avg[:, None, :])
        j_loc = np.einsum("q,eqa,eqb->eab", w, jump, jump)
        k = dofs.shape[1]
        rows = np.repeat(dofs[:, :, None], k, 2)
        cols = np.repeat(dofs[:, None, :], k, 1)
        cons_parts.append((rows, cols, c_loc))
        jump_parts.append((rows, cols, j_loc))

    def merge(parts):
        return _coo(np.concatenate([p[0].ravel() for p in parts]),
                    np.concatenate([p[1].ravel() for p in parts]),
                    np.concatenate([p[2].ravel() for p in parts]), n)

    return AhParts(volume, merge(cons_parts), merge(jump_parts), float(cfg.sigma))


def assemble_ah(space: P2Space, cfg: PenaltyConfig = PenaltyConfig()) -> sp.csr_matrix:
    """Matrix of ``a_h`` over all DOFs (``Q_h``); restrict rows/cols for ``V_h``."""
    return assemble_ah_parts(space, cfg).ah


def assemble_mass(space: P2Space, degree: int = 4) -> sp.csr_matrix:
    rule = tri_rule(degree)
    phi = shape_values(rule.points)                       # (Q, 6)
    ref = np.einsum("q,qa,qb->ab", rule.weights, phi, phi)
    loc = space.area[:, None, None] * ref[None]
    cd = space.dofs.cell_dofs
    return _coo(np.repeat(cd[:, :, None], 6, 2), np.repeat(cd[:, None, :], 6, 1), loc, space.n_dofs)


def assemble_load(space: P2Space, g, degree: int = 10) -> np.ndarray:
    """Vector of ``int g phi_i dx`` for a vectorised callable ``g(x, y)``."""
    rule = tri_rule(degree)
    pts = space.physical_points(rule.points)
    gq = np.broadcast_to(np.asarray(g(pts[..., 0], pts[..., 1]), dtype=float), pts.shape[:2])
    phi = shape_values(rule.points)
    loc = space.area[:, None] * np.einsum("q,mq,qa->ma", rule.weights, gq, phi)
    return np.bincount(space.dofs.cell_dofs.ravel(), weights=loc.ravel(), minlength=space.n_dofs)


def apply_ah_to_function(space: P2Space, ah: sp.spmatrix, g, target: str = "Q") -> np.ndarray:
    """``a_h(I_h g, phi_i)`` for the P2 nodal interpolant ``I_h g``.

    ``target`` selects rows: ``"Q"`` for all DOFs, ``"V"`` for interior ones.
    """
    vec = ah @ space.interpolate(g).coeffs
    if target == "Q":
        return vec
    if target == "V":
        return vec[space.dofs.interior_dofs]
    raise ValueError(f"target must be 'Q' or 'V', got {target!r}")


def restrict(matrix: sp.spmatrix, rows: np.ndarray, cols: np.ndarray) -> sp.csr_matrix:
    return matrix.tocsr()[rows][:, cols]


def write_coo(matrix: sp.spmatrix, path) -> None:
    """Dump as ``row col value`` lines."""
    m = matrix.tocoo()
    order = np.lexsort((m.col, m.row))
    with open(path, "w") as fh:
        for r, c, v in zip(m.row[order], m.col[order], m.data[order]):
            fh.write(f"{r} {c} {v:.17g}\n")


def ratio_checks(space: P2Space, cfg: PenaltyConfig = PenaltyConfig(), samples: int = 100, seed: int = 0):
    """Sampled coercivity and continuity constants of ``a_h`` on ``V_h``.

    Draws random interior coefficient vectors and returns
    ``(min a_h(v,v)/||v||_h^2, max |a_h(v,w)|/(||v||_h ||w||_h))``.
    """
    parts = assemble_ah_parts(space, cfg)
    V = space.dofs.interior_dofs
    A = parts.ah[V][:, V]
    E = parts.energy[V][:, V]
    rng = np.random.default_rng(seed)
    v = rng.standard_normal((samples, len(V)))
    w = rng.standard_normal((samples, len(V)))
    nv = np.sqrt(np.einsum("si,si->s", v, (E @ v.T).T))
    nw = np.sqrt(np.einsum("si,si->s", w, (E @ w.T).T))
    coer = np.einsum("si,si->s", v, (A @ v.T).T) / nv**2
    cont = np.abs(np.einsum("si,si->s", v, (A @ w.T).T)) / (nv * nw)
    return float(coer.min()), float(cont.max())
