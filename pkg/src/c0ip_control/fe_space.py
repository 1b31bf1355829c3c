"""Quadratic Lagrange degrees of freedom and P2 shape functions.

Local DOF order on a triangle: the three vertices, then the three edge
midpoints, where midpoint ``3 + k`` sits on the side opposite vertex ``k``.
Global numbering puts vertex DOFs first (mesh order), then edge DOFs in
edge order.
"""
from dataclasses import dataclass

import numpy as np

from .mesh import Mesh

__all__ = [
    "DofMap",
    "P2Space",
    "FeFunction",
    "build_dofmap",
    "shape_values",
    "shape_gradients",
    "shape_laplacians",
]

# (i, j) vertex pair of midpoint 3 + k
_MID_PAIRS = ((1, 2), (2, 0), (0, 1))


@dataclass(frozen=True, eq=False)
class DofMap:
    n_dofs: int
    dof_of_vertex: np.ndarray
    dof_of_edge_midpoint: np.ndarray
    boundary_dofs: np.ndarray
    interior_dofs: np.ndarray
    cell_dofs: np.ndarray
    nodes: np.ndarray


def build_dofmap(mesh: Mesh) -> DofMap:
    nv, ne = mesh.n_vertices, mesh.n_edges
    dof_of_vertex = np.arange(nv)
    dof_of_edge = nv + np.arange(ne)
    cell_dofs = np.hstack([mesh.triangles, nv + mesh.edge_of_triangle])

    bedges = np.flatnonzero(mesh.boundary_edge)
    on_boundary = np.zeros(nv + ne, dtype=bool)
    on_boundary[mesh.edges[bedges].ravel()] = True
    on_boundary[nv + bedges] = True

    mids = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    nodes = np.vstack([mesh.vertices, mids])
    out = DofMap(
        n_dofs=nv + ne,
        dof_of_vertex=dof_of_vertex,
        dof_of_edge_midpoint=dof_of_edge,
        boundary_dofs=np.flatnonzero(on_boundary),
        interior_dofs=np.flatnonzero(~on_boundary),
        cell_dofs=cell_dofs,
        nodes=nodes,
    )
    for arr in (dof_of_vertex, dof_of_edge, out.boundary_dofs, out.interior_dofs, cell_dofs, nodes):
        arr.setflags(write=False)
    return out


def shape_values(bary: np.ndarray) -> np.ndarray:
    """P2 basis values at barycentric points ``(..., 3)`` -> ``(..., 6)``."""
    lam = np.asarray(bary, dtype=float)
    out = np.empty(lam.shape[:-1] + (6,))
    out[..., :3] = lam * (2.0 * lam - 1.0)
    for k, (i, j) in enumerate(_MID_PAIRS):
        out[..., 3 + k] = 4.0 * lam[..., i] * lam[..., j]
    return out


def shape_gradients(grad_lambda: np.ndarray, bary: np.ndarray) -> np.ndarray:
    """Physical gradients of the P2 basis.

    ``grad_lambda`` is ``(M, 3, 2)``, ``bary`` is ``(Q, 3)`` shared by all
    triangles or ``(M, Q, 3)``. Returns ``(M, Q, 6, 2)``.
    """
    lam = np.asarray(bary, dtype=float)
    if lam.ndim == 2:
        lam = np.broadcast_to(lam, (grad_lambda.shape[0],) + lam.shape)
    g = grad_lambda[:, None, :, :]
    out = np.empty(lam.shape[:2] + (6, 2))
    out[:, :, :3, :] = (4.0 * lam - 1.0)[..., None] * g
    for k, (i, j) in enumerate(_MID_PAIRS):
        out[:, :, 3 + k, :] = 4.0 * (lam[..., j, None] * g[:, :, i] + lam[..., i, None] * g[:, :, j])
    return out


def shape_laplacians(grad_lambda: np.ndarray) -> np.ndarray:
    """Constant Laplacians of the P2 basis on each triangle, ``(M, 6)``."""
    gram = np.einsum("mia,mja->mij", grad_lambda, grad_lambda)
    out = np.empty((grad_lambda.shape[0], 6))
    out[:, :3] = 4.0 * np.einsum("mii->mi", gram)
    for k, (i, j) in enumerate(_MID_PAIRS):
        out[:, 3 + k] = 8.0 * gram[:, i, j]
    return out


class P2Space:
    """Mesh, DOF map and per-triangle affine geometry in one place.

    ``V_h`` is the restriction to ``dofs.interior_dofs``; ``Q_h`` uses all DOFs.
    """

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        self.dofs = build_dofmap(mesh)
        p = mesh.vertices[mesh.triangles]
        self.area = mesh.signed_areas
        if np.any(self.area <= 0.0):
            raise ValueError("degenerate triangle")
        # grad(lambda_k) = rot90(opposite side) / (2 area), pointing inward
        grad_lambda = np.empty((mesh.n_triangles, 3, 2))
        for k in range(3):
            d = p[:, (k + 2) % 3] - p[:, (k + 1) % 3]
            grad_lambda[:, k, 0] = -d[:, 1]
            grad_lambda[:, k, 1] = d[:, 0]
        self.grad_lambda = grad_lambda / (2.0 * self.area[:, None, None])
        self.laplacians = shape_laplacians(self.grad_lambda)

    @property
    def n_dofs(self) -> int:
        return self.dofs.n_dofs

    def physical_points(self, bary: np.ndarray) -> np.ndarray:
        """Map barycentric points ``(Q, 3)`` to ``(M, Q, 2)`` coordinates."""
        p = self.mesh.vertices[self.mesh.triangles]
        return np.einsum("qk,mkd->mqd", np.asarray(bary, dtype=float), p)

    def interpolate(self, g) -> "FeFunction":
        """Nodal interpolant of ``g(x, y)`` (vectorised callable)."""
        x, y = self.dofs.nodes.T
        return FeFunction(self, np.broadcast_to(np.asarray(g(x, y), dtype=float), x.shape).copy())

    def function(self, coeffs=None) -> "FeFunction":
        if coeffs is None:
            coeffs = np.zeros(self.n_dofs)
        return FeFunction(self, coeffs)


class FeFunction:
    """Piecewise quadratic function given by its nodal values."""

    def __init__(self, space: P2Space, coeffs):
        coeffs = np.asarray(coeffs, dtype=float)
        if coeffs.shape != (space.n_dofs,):
            raise ValueError(f"expected {space.n_dofs} coefficients, got shape {coeffs.shape}")
        self.space = space
        self.coeffs = coeffs

    def local(self, tri=None) -> np.ndarray:
        cd = self.space.dofs.cell_dofs
        return self.coeffs[cd] if tri is None else self.coeffs[cd[tri]]

    def _check(self, tri):
        if not 0 <= tri < self.space.mesh.n_triangles:
            raise IndexError(f"triangle index {tri} out of range")

    def eval(self, tri: int, bary) -> float:
        self._check(tri)
        return float(shape_values(bary) @ self.local(tri))

    def eval_gradient(self, tri: int, bary) -> np.ndarray:
        self._check(tri)
        g = shape_gradients(self.space.grad_lambda[tri:tri + 1], np.atleast_2d(bary))[0, 0]
        return self.local(tri) @ g

    def eval_laplacian(self, tri: int) -> float:
        self._check(tri)
        return float(self.space.laplacians[tri] @ self.local(tri))

    def laplacians(self) -> np.ndarray:
        """Laplacian on every triangle, ``(M,)``."""
        return np.einsum("ma,ma->m", self.space.laplacians, self.local())

    def values_at(self, bary) -> np.ndarray:
        """Values at barycentric points ``(Q, 3)`` on every triangle, ``(M, Q)``."""
        return self.local() @ shape_values(bary).T

    def __add__(self, other: "FeFunction") -> "FeFunction":
        return FeFunction(self.space, self.coeffs + other.coeffs)

    def __sub__(self, other: "FeFunction") -> "FeFunction":
        return FeFunction(self.space, self.coeffs - other.coeffs)

    def __mul__(self, c: float) -> "FeFunction":
        return FeFunction(self.space, c * self.coeffs)

    __rmul__ = __mul__
