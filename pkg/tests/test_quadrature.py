import itertools
from fractions import Fraction
from math import factorial

import numpy as np
import pytest

from c0ip_control.quadrature import edge_rule, tri_rule

REF = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])


def monomial_exact(a, b):
    """int over the reference triangle of x^a y^b = a! b! / (a + b + 2)!."""
    return Fraction(factorial(a) * factorial(b), factorial(a + b + 2))


def integrate_ref(rule, g):
    xy = rule.points @ REF
    return 0.5 * np.sum(rule.weights * g(xy[:, 0], xy[:, 1]))


@pytest.mark.parametrize("degree", [2, 4, 6, 10])
def test_weights_positive_and_normalised(degree):
    rule = tri_rule(degree)
    assert np.all(rule.weights > 0)
    assert abs(rule.weights.sum() - 1.0) < 1e-14
    assert np.allclose(rule.points.sum(axis=1), 1.0, atol=1e-15)
    assert np.all(rule.points >= 0)


@pytest.mark.parametrize("degree", [2, 4, 6, 10])
def test_exact_for_all_monomials_up_to_degree(degree):
    rule = tri_rule(degree)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            exact = float(monomial_exact(a, b))
            got = integrate_ref(rule, lambda x, y: x**a * y**b)
            assert abs(got - exact) <= 1e-14 * max(1.0, abs(exact)) + 1e-16, (a, b)


def test_reference_examples():
    assert integrate_ref(tri_rule(2), lambda x, y: np.ones_like(x)) == pytest.approx(0.5, abs=1e-15)
    assert integrate_ref(tri_rule(4), lambda x, y: x**2 * y**2) == pytest.approx(1 / 180, rel=1e-13)
    assert integrate_ref(tri_rule(6), lambda x, y: x**6) == pytest.approx(1 / 56, rel=1e-13)


@pytest.mark.parametrize("degree", [2, 4, 6, 10])
def test_random_polynomial(degree):
    rng = np.random.default_rng(degree)
    terms = [(a, b, rng.standard_normal()) for a in range(degree + 1) for b in range(degree + 1 - a)]
    exact = sum(c * float(monomial_exact(a, b)) for a, b, c in terms)
    got = integrate_ref(tri_rule(degree), lambda x, y: sum(c * x**a * y**b for a, b, c in terms))
    assert abs(got - exact) <= 1e-13 * sum(abs(c) * float(monomial_exact(a, b)) for a, b, c in terms)


def test_symmetric_under_vertex_permutation():
    rule = tri_rule(10)
    for perm in itertools.permutations(range(3)):
        p = rule.points[:, perm]
        order = np.lexsort(p.T[::-1])
        base = np.lexsort(rule.points.T[::-1])
        assert np.allclose(p[order], rule.points[base], atol=1e-15)


@pytest.mark.parametrize("degree", [0, 3, 5, 8, 12])
def test_unsupported_degree(degree):
    with pytest.raises(ValueError):
        tri_rule(degree)


@pytest.mark.parametrize("n", range(1, 7))
def test_edge_rule_exactness(n):
    rule = edge_rule(n)
    assert np.all(rule.weights > 0)
    assert abs(rule.weights.sum() - 1.0) < 1e-14
    assert np.all((rule.points > 0) & (rule.points < 1))
    for k in range(2 * n):
        assert np.sum(rule.weights * rule.points**k) == pytest.approx(1 / (k + 1), rel=1e-14)
    # one degree higher is no longer exact
    assert abs(np.sum(rule.weights * rule.points**(2 * n)) - 1 / (2 * n + 1)) > 1e-8


def test_edge_examples():
    assert np.sum(edge_rule(1).weights * edge_rule(1).points) == pytest.approx(0.5)
    r = edge_rule(3)
    assert np.sum(r.weights * r.points**5) == pytest.approx(1 / 6, rel=1e-14)
    r = edge_rule(2)
    assert np.sum(r.weights * r.points**3) == pytest.approx(1 / 4, rel=1e-14)


@pytest.mark.parametrize("n", [0, 7, -1])
def test_edge_rule_unsupported(n):
    with pytest.raises(ValueError):
        edge_rule(n)
