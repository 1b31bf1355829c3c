import numpy as np
import pytest
import sympy

from c0ip_control.fe_space import P2Space, build_dofmap, shape_values
from c0ip_control.mesh import Mesh, build_unit_square, nvb_refine, uniform_refine
from c0ip_control.quadrature import edge_rule, tri_rule

REF_MESH = Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]), np.array([[0, 1, 2]]), [0], [0])


def test_dofmap_counts():
    d = build_dofmap(build_unit_square(1))
    assert d.n_dofs == 9
    assert len(d.boundary_dofs) == 8 and len(d.interior_dofs) == 1
    assert np.allclose(d.nodes[d.interior_dofs[0]], [0.5, 0.5])
    assert build_dofmap(build_unit_square(2)).n_dofs == 25
    r = uniform_refine(build_unit_square(1))
    assert build_dofmap(r).n_dofs == r.n_vertices + r.n_edges


def test_dofmap_partition_and_classification():
    m = nvb_refine(build_unit_square(3), [2, 7])
    d = build_dofmap(m)
    both = np.concatenate([d.boundary_dofs, d.interior_dofs])
    assert np.array_equal(np.sort(both), np.arange(d.n_dofs))
    on_boundary = np.any(np.isclose(d.nodes, 0.0) | np.isclose(d.nodes, 1.0), axis=1)
    assert np.array_equal(np.flatnonzero(on_boundary), np.sort(d.boundary_dofs))
    # vertices first, then edges in mesh order
    assert np.array_equal(d.dof_of_vertex, np.arange(m.n_vertices))
    assert np.array_equal(d.dof_of_edge_midpoint, m.n_vertices + np.arange(m.n_edges))


def test_lagrange_property():
    space = P2Space(build_unit_square(2))
    cd = space.dofs.cell_dofs
    nodes_bary = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1], [0, .5, .5], [.5, 0, .5], [.5, .5, 0]], float)
    assert np.allclose(shape_values(nodes_bary), np.eye(6), atol=1e-15)
    for t in (0, 3, 7):
        pts = space.physical_points(nodes_bary)[t]
        assert np.allclose(pts, space.dofs.nodes[cd[t]])


def test_vertex_basis_at_barycenter():
    assert shape_values(np.array([[1 / 3, 1 / 3, 1 / 3]]))[0, 0] == pytest.approx(-1 / 9, abs=1e-15)


def test_reference_triangle_derivatives_against_sympy():
    x, y = sympy.symbols("x y")
    lam = [1 - x - y, x, y]
    basis = [lam[i] * (2 * lam[i] - 1) for i in range(3)]
    basis += [4 * lam[1] * lam[2], 4 * lam[2] * lam[0], 4 * lam[0] * lam[1]]
    space = P2Space(REF_MESH)
    rng = np.random.default_rng(0)
    pts = rng.dirichlet(np.ones(3), size=5)
    for k, b in enumerate(basis):
        coeffs = np.zeros(6)
        coeffs[space.dofs.cell_dofs[0, k]] = 1.0
        fn = space.function(coeffs)
        lap = sympy.diff(b, x, 2) + sympy.diff(b, y, 2)
        assert fn.eval_laplacian(0) == pytest.approx(float(lap), abs=1e-13)
        gx, gy = sympy.lambdify((x, y), [sympy.diff(b, x), sympy.diff(b, y)])(*pts[:, 1:].T)
        for q, bary in enumerate(pts):
            assert np.allclose(fn.eval_gradient(0, bary), [np.broadcast_to(gx, 5)[q], np.broadcast_to(gy, 5)[q]])
    # basis x(2x-1) at (1, 0): Laplacian 4, gradient (3, 0)
    fn = space.function(np.eye(6)[space.dofs.cell_dofs[0, 1]])
    assert fn.eval_laplacian(0) == pytest.approx(4.0)
    assert np.allclose(fn.eval_gradient(0, [0, 1, 0]), [3.0, 0.0])


def test_interpolation_examples():
    space = P2Space(nvb_refine(build_unit_square(2), [1, 4]))
    xsq = space.interpolate(lambda x, y: x**2)
    assert np.allclose(xsq.laplacians(), 2.0)
    assert np.allclose(space.interpolate(lambda x, y: x + y).laplacians(), 0.0, atol=1e-12)
    lin = space.interpolate(lambda x, y: x + 2 * y)
    for t in range(space.mesh.n_triangles):
        assert np.allclose(lin.eval_gradient(t, [0.2, 0.3, 0.5]), [1.0, 2.0])
    # a triangle touching x = 0.5: gradient of x^2 there is (1, 0)
    t = int(np.flatnonzero(np.isclose(space.mesh.vertices[space.mesh.triangles][:, :, 0], 0.5).any(axis=1))[0])
    k = int(np.flatnonzero(np.isclose(space.mesh.vertices[space.mesh.triangles[t], 0], 0.5))[0])
    assert np.allclose(xsq.eval_gradient(t, np.eye(3)[k]), [1.0, 0.0])


def test_partition_of_unity_and_p2_reproduction():
    space = P2Space(nvb_refine(build_unit_square(3), [0, 4, 9]))
    rule = tri_rule(10)
    assert np.allclose(shape_values(rule.points).sum(axis=1), 1.0, atol=1e-13)
    pts = space.physical_points(rule.points)
    x, y = pts[..., 0], pts[..., 1]
    rng = np.random.default_rng(1)
    c = rng.standard_normal(6)
    g = lambda x, y: c[0] + c[1] * x + c[2] * y + c[3] * x**2 + c[4] * x * y + c[5] * y**2
    assert np.max(np.abs(space.interpolate(g).values_at(rule.points) - g(x, y))) < 1e-12


def test_vh_functions_vanish_on_boundary():
    space = P2Space(build_unit_square(3))
    coeffs = np.random.default_rng(2).standard_normal(space.n_dofs)
    coeffs[space.dofs.boundary_dofs] = 0.0
    fn = space.function(coeffs)
    m = space.mesh
    s = edge_rule(5).points
    for e in np.flatnonzero(m.boundary_edge):
        t = m.edge_tris[e, 0]
        a, b = m.edges[e]
        tv = list(m.triangles[t])
        for si in s:
            bary = np.zeros(3)
            bary[tv.index(a)] = 1 - si
            bary[tv.index(b)] = si
            assert abs(fn.eval(t, bary)) < 1e-13


def test_function_errors_and_arithmetic():
    space = P2Space(build_unit_square(1))
    with pytest.raises(IndexError):
        space.function().eval(5, [1 / 3] * 3)
    with pytest.raises(IndexError):
        space.function().eval_laplacian(-1)
    with pytest.raises(ValueError):
        space.function(np.zeros(3))
    a = space.interpolate(lambda x, y: x)
    b = space.interpolate(lambda x, y: y)
    assert np.allclose((2 * a - b + a * 0.5).coeffs, 2.5 * a.coeffs - b.coeffs)


def test_degenerate_triangle_rejected():
    with pytest.raises(ValueError, match="area"):
        P2Space(Mesh(np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]]), np.array([[0, 1, 2]]), [0], [0]))
