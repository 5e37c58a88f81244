import numpy as np
import pytest

from helmdg.quadrature import (
    edge_rule,
    monomial_integral_triangle,
    triangle_rule,
)


@pytest.mark.parametrize("degree", [0, 1, 2, 5, 9, 16, 25, 36])
def test_triangle_monomial_exactness(degree):
    rule = triangle_rule(degree)
    assert np.all(rule.weights > 0)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            quad = np.sum(rule.weights * rule.points[:, 0] ** a * rule.points[:, 1] ** b)
            exact = monomial_integral_triangle(a, b)
            assert abs(quad - exact) <= 1e-13 * abs(exact)


@pytest.mark.parametrize("degree", [0, 3, 11, 24])
def test_edge_monomial_exactness(degree):
    rule = edge_rule(degree)
    assert np.all(rule.weights > 0)
    for a in range(degree + 1):
        quad = np.sum(rule.weights * rule.points**a)
        assert abs(quad - 1.0 / (a + 1)) <= 1e-13 / (a + 1)


def test_triangle_weights_sum_to_area():
    assert abs(np.sum(triangle_rule(7).weights) - 0.5) < 1e-14


def test_points_inside_reference_elements():
    r = triangle_rule(12)
    assert np.all(r.points >= 0)
    assert np.all(r.points.sum(axis=1) <= 1 + 1e-14)
    e = edge_rule(12)
    assert np.all((e.points > 0) & (e.points < 1))


def test_rejects_negative_degree():
    with pytest.raises(ValueError):
        triangle_rule(-1)
    with pytest.raises(ValueError):
        edge_rule(-2)
