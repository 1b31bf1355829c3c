"""Conforming triangulations with edge topology and refinement.

Triangles are stored counterclockwise. Local edge ``k`` of a triangle is the
side opposite its local vertex ``k``, i.e. ``(v[k+1], v[k+2])`` modulo 3.
``refinement_edge`` holds the local index of the side opposite the newest
vertex, which is what newest vertex bisection (NVB) splits.
"""
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

__all__ = [
    "Mesh",
    "build_unit_square",
    "uniform_refine",
    "nvb_refine",
    "check_conforming",
    "write_mesh",
    "read_mesh",
]

_LOCAL_EDGES = np.array([[1, 2], [2, 0], [0, 1]])


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable triangulation.

    Parameters
    ----------
    vertices : (N, 2) float array
    triangles : (M, 3) int array, counterclockwise
    refinement_edge : (M,) int array with entries in {0, 1, 2}
    generation : (M,) int array, number of bisections since the coarse mesh

    Derived attributes ``edges`` (lexicographically sorted vertex pairs),
    ``edge_tris`` (``(E, 2)``, lower triangle index first, ``-1`` for the
    missing neighbour of a boundary edge), ``edge_of_triangle`` and
    ``boundary_edge`` are built on construction.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    refinement_edge: np.ndarray
    generation: np.ndarray
    edges: np.ndarray = field(init=False, repr=False)
    edge_tris: np.ndarray = field(init=False, repr=False)
    edge_of_triangle: np.ndarray = field(init=False, repr=False)
    boundary_edge: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        verts = np.ascontiguousarray(self.vertices, dtype=float)
        tris = np.ascontiguousarray(self.triangles, dtype=np.int64)
        ref = np.ascontiguousarray(self.refinement_edge, dtype=np.int64)
        gen = np.ascontiguousarray(self.generation, dtype=np.int64)
        if verts.ndim != 2 or verts.shape[1] != 2 or not np.all(np.isfinite(verts)):
            raise ValueError("vertices must be a finite (N, 2) array")
        if tris.ndim != 2 or tris.shape[1] != 3:
            raise ValueError("triangles must be an (M, 3) array")
        if ref.shape != (len(tris),) or gen.shape != (len(tris),):
            raise ValueError("refinement_edge and generation need one entry per triangle")
        if tris.size and (tris.min() < 0 or tris.max() >= len(verts)):
            raise ValueError("triangle vertex index out of range")
        if np.any((ref < 0) | (ref > 2)):
            raise ValueError("refinement_edge entries must lie in {0, 1, 2}")
        if np.any(gen < 0):
            raise ValueError("generation must be nonnegative")
        if np.any((tris[:, 0] == tris[:, 1]) | (tris[:, 1] == tris[:, 2]) | (tris[:, 0] == tris[:, 2])):
            raise ValueError("triangle with repeated vertex")

        for name, arr in (("vertices", verts), ("triangles", tris),
                          ("refinement_edge", ref), ("generation", gen)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

        if np.any(self.signed_areas <= 0.0):
            raise ValueError("triangles must have positive signed area")

        local = np.sort(tris[:, _LOCAL_EDGES], axis=2).reshape(-1, 2)
        edges, inverse = np.unique(local, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        counts = np.bincount(inverse, minlength=len(edges))
        if np.any(counts > 2):
            raise ValueError("edge shared by more than two triangles")
        owner = np.repeat(np.arange(len(tris)), 3)
        order = np.argsort(inverse, kind="stable")
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        edge_tris = np.full((len(edges), 2), -1, dtype=np.int64)
        edge_tris[:, 0] = owner[order[starts]]
        two = counts == 2
        edge_tris[two, 1] = owner[order[starts[two] + 1]]

        for name, arr in (("edges", edges), ("edge_tris", edge_tris),
                          ("edge_of_triangle", inverse.reshape(-1, 3)),
                          ("boundary_edge", counts == 1)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_triangles(self) -> int:
        return len(self.triangles)

    @property
    def n_edges(self) -> int:
        return len(self.edges)

    @property
    def signed_areas(self) -> np.ndarray:
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])

    @property
    def edge_lengths(self) -> np.ndarray:
        d = self.vertices[self.edges[:, 1]] - self.vertices[self.edges[:, 0]]
        return np.hypot(d[:, 0], d[:, 1])

    @property
    def diameters(self) -> np.ndarray:
        """Per-triangle diameter ``h_T`` (longest side)."""
        return self.edge_lengths[self.edge_of_triangle].max(axis=1)

    @property
    def h(self) -> float:
        return float(self.diameters.max())

    def min_angle(self) -> float:
        """Smallest interior angle over all triangles, in radians."""
        p = self.vertices[self.triangles]
        angles = []
        for k in range(3):
            a = p[:, (k + 1) % 3] - p[:, k]
            b = p[:, (k + 2) % 3] - p[:, k]
            cos = np.einsum("ij,ij->i", a, b) / (np.linalg.norm(a, axis=1) * np.linalg.norm(b, axis=1))
            angles.append(np.arccos(np.clip(cos, -1.0, 1.0)))
        return float(np.min(angles))


def build_unit_square(n: int) -> Mesh:
    """Structured mesh of (0,1)^2 with ``2 n^2`` triangles.

    Each cell is split along its lower-left to upper-right diagonal, and the
    diagonal is the refinement edge of both halves.
    """
    if int(n) != n or n < 1:
        raise ValueError("n must be a positive integer")
    n = int(n)
    t = np.linspace(0.0, 1.0, n + 1)
    xx, yy = np.meshgrid(t, t)
    vertices = np.column_stack([xx.ravel(), yy.ravel()])
    j, i = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    v00 = (j * (n + 1) + i).ravel()
    v10 = v00 + 1
    v01 = v00 + n + 1
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.stack([lower, upper], axis=1).reshape(-1, 3)
    ref = np.tile([1, 2], n * n)
    return Mesh(vertices, triangles, ref, np.zeros(len(triangles), dtype=np.int64))


def uniform_refine(mesh: Mesh) -> Mesh:
    """Red refinement: split every triangle into four through edge midpoints."""
    nv = mesh.n_vertices
    mids = 0.5 * (mesh.vertices[mesh.edges[:, 0]] + mesh.vertices[mesh.edges[:, 1]])
    vertices = np.vstack([mesh.vertices, mids])
    t = mesh.triangles
    m = nv + mesh.edge_of_triangle  # m[:, k] is the midpoint opposite vertex k
    corner0 = np.column_stack([t[:, 0], m[:, 2], m[:, 1]])
    corner1 = np.column_stack([m[:, 2], t[:, 1], m[:, 0]])
    corner2 = np.column_stack([m[:, 1], m[:, 0], t[:, 2]])
    middle = np.column_stack([m[:, 0], m[:, 1], m[:, 2]])
    triangles = np.stack([corner0, corner1, corner2, middle], axis=1).reshape(-1, 3)
    # Corner children are scaled copies of the parent; the middle child is the
    # parent rotated by pi, whose vertex k plays the role of parent vertex k-1.
    r = mesh.refinement_edge
    ref = np.stack([r, r, r, (r + 1) % 3], axis=1).ravel()
    gen = np.repeat(mesh.generation + 2, 4)
    return Mesh(vertices, triangles, ref, gen)


def _closure(mesh: Mesh, marked_edges: np.ndarray) -> np.ndarray:
    """Mark refinement edges of every triangle holding a marked edge."""
    marked_edges = marked_edges.copy()
    ref_edge = mesh.edge_of_triangle[np.arange(mesh.n_triangles), mesh.refinement_edge]
    while True:
        touched = marked_edges[mesh.edge_of_triangle].any(axis=1)
        missing = touched & ~marked_edges[ref_edge]
        if not missing.any():
            return marked_edges
        marked_edges[ref_edge[missing]] = True


def nvb_refine(mesh: Mesh, marked) -> Mesh:
    """Newest vertex bisection of the marked triangles plus conforming closure.

    Every marked triangle is bisected through its refinement edge; further
    bisections are added until no hanging vertex remains. Children carry the
    new midpoint as local vertex 0 and refinement edge 0.
    """
    marked = np.unique(np.asarray(list(marked) if isinstance(marked, (set, frozenset)) else marked,
                                  dtype=np.int64))
    if marked.size == 0:
        return mesh
    if marked.min() < 0 or marked.max() >= mesh.n_triangles:
        raise IndexError("marked triangle index out of range")

    ref_edge = mesh.edge_of_triangle[np.arange(mesh.n_triangles), mesh.refinement_edge]
    edge_marks = np.zeros(mesh.n_edges, dtype=bool)
    edge_marks[ref_edge[marked]] = True
    edge_marks = _closure(mesh, edge_marks)

    split = np.flatnonzero(edge_marks)
    midpoint = np.full(mesh.n_edges, -1, dtype=np.int64)
    midpoint[split] = mesh.n_vertices + np.arange(split.size)
    e = mesh.edges[split]
    vertices = np.vstack([mesh.vertices, 0.5 * (mesh.vertices[e[:, 0]] + mesh.vertices[e[:, 1]])])

    def edge_mid(a, b):
        key = (min(a, b), max(a, b))
        return midpoint[edge_lookup[key]]

    edge_lookup = {(int(a), int(b)): k for k, (a, b) in enumerate(mesh.edges)}
    triangles, refs, gens = [], [], []
    for t in range(mesh.n_triangles):
        v = mesh.triangles[t]
        g = int(mesh.generation[t])
        if not edge_marks[mesh.edge_of_triangle[t]].any():
            triangles.append(tuple(int(x) for x in v))
            refs.append(int(mesh.refinement_edge[t]))
            gens.append(g)
            continue
        r = int(mesh.refinement_edge[t])
        z0, z1, z2 = int(v[r]), int(v[(r + 1) % 3]), int(v[(r + 2) % 3])
        m = int(edge_mid(z1, z2))
        for child in ((m, z0, z1), (m, z2, z0)):
            a, b = child[1], child[2]
            mm = edge_mid(a, b)
            if mm >= 0:
                triangles.append((int(mm), child[0], a))
                triangles.append((int(mm), b, child[0]))
                refs += [0, 0]
                gens += [g + 2, g + 2]
            else:
                triangles.append(child)
                refs.append(0)
                gens.append(g + 1)
    return Mesh(vertices, np.array(triangles, dtype=np.int64), np.array(refs), np.array(gens))


def check_conforming(mesh: Mesh, unit_square: bool = True, tol: float = 1e-12) -> bool:
    """Conformity test: no hanging vertices and consistent edge topology.

    Every edge already has one or two neighbours by construction; a hanging
    vertex would leave a one-sided edge inside the domain, so for the unit
    square it suffices to check that all one-sided edges lie on its boundary.
    """
    if unit_square:
        p = mesh.vertices[mesh.edges[mesh.boundary_edge]]
        on_side = np.zeros(len(p), dtype=bool)
        for axis in (0, 1):
            for value in (0.0, 1.0):
                on_side |= np.all(np.abs(p[:, :, axis] - value) < tol, axis=1)
        if not on_side.all():
            return False
    # Euler characteristic of a disc: V - E + F = 1
    return mesh.n_vertices - mesh.n_edges + mesh.n_triangles == 1


def write_mesh(mesh: Mesh, path) -> None:
    """Write ``vertices n`` / ``x y`` lines then ``triangles m`` / ``i j k`` lines."""
    lines = [f"vertices {mesh.n_vertices}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.vertices]
    lines.append(f"triangles {mesh.n_triangles}")
    lines += [f"{i} {j} {k}" for i, j, k in mesh.triangles]
    Path(path).write_text("\n".join(lines) + "\n")


def read_mesh(path) -> Mesh:
    """Read the plain-text format of :func:`write_mesh`.

    Refinement edges are reset to each triangle's longest side.
    """
    tokens = Path(path).read_text().split("\n")
    nv = int(tokens[0].split()[1])
    vertices = np.array([list(map(float, s.split())) for s in tokens[1:1 + nv]])
    nt = int(tokens[1 + nv].split()[1])
    triangles = np.array([list(map(int, s.split())) for s in tokens[2 + nv:2 + nv + nt]], dtype=np.int64)
    p = vertices[triangles]
    lengths = np.stack([np.linalg.norm(p[:, (k + 2) % 3] - p[:, (k + 1) % 3], axis=1) for k in range(3)], axis=1)
    return Mesh(vertices, triangles, lengths.argmax(axis=1), np.zeros(nt, dtype=np.int64))
