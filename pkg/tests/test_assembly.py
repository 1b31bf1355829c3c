import numpy as np
import pytest
import sympy
from scipy import integrate

from c0ip_control.assembly import (PenaltyConfig, apply_ah_to_function, assemble_ah, assemble_ah_parts,
                                   assemble_load, assemble_mass, edge_geometry, normal_derivative_jumps,
                                   ratio_checks, restrict, write_coo)
from c0ip_control.fe_space import P2Space, shape_values
from c0ip_control.manufactured import example1
from c0ip_control.mesh import build_unit_square, nvb_refine, uniform_refine
from c0ip_control.quadrature import edge_rule

SIGMA = 20.0


def ah_oracle_unit_square(expr, sigma, n=1):
    """a_h(v, v) on the n x n unit-square mesh for a globally smooth v.

    Interior jumps vanish, so only the volume term and the boundary edges
    (all of length 1/n) remain:
    int (Lap v)^2 - 2 int_bdry Lap v dv/dn + sigma n int_bdry (dv/dn)^2,
    with the consistency sign that makes the scheme consistent for the
    outward-sum jump.
    """
    x, y, t = sympy.symbols("x y t")
    v = expr(x, y)
    lap = sympy.diff(v, x, 2) + sympy.diff(v, y, 2)
    total = sympy.integrate(lap**2, (x, 0, 1), (y, 0, 1))
    sides = [((t, 0), (0, -1)), ((1, t), (1, 0)), ((t, 1), (0, 1)), ((0, t), (-1, 0))]
    for (px, py), (nx, ny) in sides:
        dn = nx * sympy.diff(v, x) + ny * sympy.diff(v, y)
        sub = {x: px, y: py}
        total += sympy.integrate((-2 * lap * dn + sigma * n * dn**2).subs(sub), (t, 0, 1))
    return total


def test_oracle_square_quadratic():
    space = P2Space(build_unit_square(1))
    v = space.interpolate(lambda x, y: x**2 + y**2).coeffs
    parts = assemble_ah_parts(space, PenaltyConfig(SIGMA))
    assert v @ (parts.volume @ v) == pytest.approx(16.0, rel=1e-13)
    exact = float(ah_oracle_unit_square(lambda x, y: x**2 + y**2, SIGMA))
    assert exact == pytest.approx(16 - 32 + 8 * SIGMA)
    assert v @ (parts.ah @ v) == pytest.approx(exact, rel=1e-13)


@pytest.mark.parametrize("expr", [lambda x, y: x * y, lambda x, y: x**2 - 3 * x * y + y**2 / 2 + x])
def test_oracle_other_quadratics(expr):
    space = P2Space(build_unit_square(2))
    v = space.interpolate(expr).coeffs
    assert v @ (assemble_ah(space, PenaltyConfig(SIGMA)) @ v) == pytest.approx(
        float(ah_oracle_unit_square(expr, SIGMA, n=2)), rel=1e-12, abs=1e-12)


def test_symmetry_and_constant_kernel():
    space = P2Space(nvb_refine(build_unit_square(3), [0, 5, 11]))
    A = assemble_ah(space)
    assert abs(A - A.T).max() <= 1e-12 * abs(A).max()
    one = np.ones(space.n_dofs)
    assert np.max(np.abs(A @ one)) <= 1e-12 * abs(A).max()


def test_affine_functions_only_see_boundary_terms():
    space = P2Space(build_unit_square(3))
    parts = assemble_ah_parts(space, PenaltyConfig(SIGMA))
    v = space.interpolate(lambda x, y: 1 + 2 * x - y).coeffs
    scale = abs(parts.ah).max()
    assert np.max(np.abs(parts.volume @ v)) <= 1e-12 * scale
    jumps = normal_derivative_jumps(space, v, edge_rule(3).points)
    assert np.max(np.abs(jumps[~space.mesh.boundary_edge])) < 1e-12
    # boundary edges carry grad v . n, so a_h(v, .) is not zero on Q_h
    assert np.max(np.abs(jumps[space.mesh.boundary_edge])) > 0.5
    assert np.max(np.abs(parts.ah @ v)) > 1.0


def test_edge_geometry_orientation():
    space = P2Space(build_unit_square(3))
    geom = edge_geometry(space)
    assert np.allclose(np.linalg.norm(geom.normals, axis=1), 1.0)
    m = space.mesh
    centroid = m.vertices[m.triangles].mean(axis=1)
    mid = m.vertices[m.edges].mean(axis=1)
    # n_e points away from the lower-indexed neighbour
    assert np.all(np.einsum("ij,ij->i", geom.normals, mid - centroid[m.edge_tris[:, 0]]) > 0)
    b = m.boundary_edge
    outward = np.where(np.isclose(mid[b], 0.0), -1.0, np.where(np.isclose(mid[b], 1.0), 1.0, 0.0))
    assert np.allclose(geom.normals[b], outward)


def test_penalty_config():
    with pytest.raises(ValueError):
        PenaltyConfig(0.5)
    assert PenaltyConfig().sigma == 20.0


def test_mass_matrix():
    space = P2Space(nvb_refine(build_unit_square(2), [1]))
    M = assemble_mass(space)
    one = np.ones(space.n_dofs)
    assert one @ (M @ one) == pytest.approx(1.0, rel=1e-14)
    assert abs(M - M.T).max() < 1e-15
    assert np.linalg.eigvalsh(M.toarray()).min() > 0
    x = space.interpolate(lambda x, y: x).coeffs
    assert x @ (M @ x) == pytest.approx(1 / 3, rel=1e-13)


def test_load_vector():
    space = P2Space(build_unit_square(3))
    assert np.all(assemble_load(space, lambda x, y: 0.0 * x) == 0)
    assert assemble_load(space, lambda x, y: np.ones_like(x)).sum() == pytest.approx(1.0, rel=1e-14)


def test_load_entry_against_adaptive_quadrature():
    # degree-10 quadrature resolves the cos(4 pi x) content of f from h = 1/8 on
    space = P2Space(build_unit_square(8))
    f = example1().f
    F = assemble_load(space, f)
    dof = int(space.dofs.interior_dofs[37])
    total = 0.0
    for t in np.flatnonzero((space.dofs.cell_dofs == dof).any(axis=1)):
        k = int(np.flatnonzero(space.dofs.cell_dofs[t] == dof)[0])
        p = space.mesh.vertices[space.mesh.triangles[t]]

        def integrand(s, r):
            bary = np.array([[1 - r - s, r, s]])
            xy = bary @ p
            return f(xy[0, 0], xy[0, 1]) * shape_values(bary)[0, k]

        val, _ = integrate.dblquad(integrand, 0, 1, 0, lambda r: 1 - r, epsabs=1e-12, epsrel=1e-12)
        total += 2 * space.area[t] * val
    assert F[dof] == pytest.approx(total, rel=1e-9)


def test_apply_ah_to_function():
    space = P2Space(build_unit_square(4))
    A = assemble_ah(space)
    assert np.max(np.abs(apply_ah_to_function(space, A, lambda x, y: 3.0 + 0 * x))) < 1e-10
    g = lambda x, y: x**2 + y**2
    assert np.allclose(apply_ah_to_function(space, A, g), A @ space.interpolate(g).coeffs, rtol=0, atol=0)
    c = lambda x, y: np.cos(np.pi * x) * np.cos(np.pi * y)
    ref = A @ space.interpolate(c).coeffs
    assert np.max(np.abs(apply_ah_to_function(space, A, c) - ref)) <= 1e-12 * np.max(np.abs(ref))
    assert np.array_equal(apply_ah_to_function(space, A, c, target="V"), ref[space.dofs.interior_dofs])
    with pytest.raises(ValueError):
        apply_ah_to_function(space, A, c, target="W")


def test_restrict_gives_vh_block():
    space = P2Space(build_unit_square(2))
    A = assemble_ah(space)
    V = space.dofs.interior_dofs
    B = restrict(A, V, V)
    assert B.shape == (len(V), len(V))
    assert np.allclose(B.toarray(), A.toarray()[np.ix_(V, V)])


def test_coercivity_and_continuity_samples():
    coer, cont = ratio_checks(P2Space(build_unit_square(4)), PenaltyConfig(SIGMA), samples=100, seed=7)
    assert coer >= 0.05
    assert cont <= 10.0


def test_penalty_energy_decreases_under_refinement():
    g = lambda x, y: np.cos(np.pi * x) * np.cos(np.pi * y)
    mesh = build_unit_square(2)
    values = []
    for _ in range(4):
        space = P2Space(mesh)
        v = space.interpolate(g).coeffs
        values.append(SIGMA * v @ (assemble_ah_parts(space).jump @ v))
        mesh = uniform_refine(mesh)
    assert all(b <= a for a, b in zip(values, values[1:]))


def test_write_coo(tmp_path):
    space = P2Space(build_unit_square(1))
    A = assemble_ah(space)
    path = tmp_path / "a.coo"
    write_coo(A, path)
    rows = np.loadtxt(path)
    assert rows.shape[1] == 3
    back = np.zeros(A.shape)
    back[rows[:, 0].astype(int), rows[:, 1].astype(int)] = rows[:, 2]
    assert np.array_equal(back, A.toarray())


def test_clamped_plate_solve_converges():
    """a_h alone on V_h solves Delta^2 w = g with w = dw/dn = 0; a wrong
    consistency sign shows up as a stalled energy error here."""
    from scipy.sparse.linalg import spsolve

    from c0ip_control.error_metrics import error_norms

    w = example1().exact_phi
    g = w.bilaplacian_field()
    errors = []
    for n in (16, 32, 64):
        space = P2Space(build_unit_square(n))
        V = space.dofs.interior_dofs
        A = assemble_ah(space)
        coeffs = np.zeros(space.n_dofs)
        coeffs[V] = spsolve(A[V][:, V].tocsc(), assemble_load(space, g)[V])
        errors.append(error_norms(w, space.function(coeffs)).energy)
    orders = np.log2(np.array(errors[:-1]) / np.array(errors[1:]))
    assert 0.85 < orders[-1] < 1.15
