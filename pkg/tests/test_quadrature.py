from math import factorial

import numpy as np
import pytest

from afem2d import Barycentric, QuadratureRule, quadrature_of_order
from afem2d.quadrature import gauss_legendre_01


def triangle_monomial(a, b):
    """Exact integral of x^a y^b over the reference triangle."""
    return factorial(a) * factorial(b) / factorial(a + b + 2)


@pytest.mark.parametrize("order", range(1, 10))
def test_triangle_rules_integrate_monomials_exactly(order):
    qr = quadrature_of_order(order)
    x, y = qr.bary.coords[:, 1], qr.bary.coords[:, 2]
    for a in range(order + 1):
        for b in range(order + 1 - a):
            approx = 0.5 * qr.weights @ (x ** a * y ** b)
            assert abs(approx - triangle_monomial(a, b)) < 1e-12, (a, b)


@pytest.mark.parametrize("order", range(1, 10))
def test_edge_rules_integrate_monomials_exactly(order):
    qr = quadrature_of_order(order, "1D")
    t = qr.bary.coords[:, 0]
    for k in range(order + 1):
        assert abs(qr.weights @ t ** k - 1 / (k + 1)) < 1e-12


@pytest.mark.parametrize("order", [1, 4, 5, 9, 14])
def test_rules_are_well_formed(order):
    qr = QuadratureRule.of_order(order)
    assert np.isclose(qr.weights.sum(), 1.0)
    assert np.all(qr.bary.coords >= 0)
    assert qr.order >= order


def test_orders_below_six_use_positive_symmetric_rules():
    for order in range(1, 6):
        qr = quadrature_of_order(order)
        assert np.all(qr.weights > 0)
        # invariant under permutations of the barycentric coordinates
        nodes = qr.bary.coords
        for perm in ([1, 0, 2], [2, 1, 0], [0, 2, 1]):
            moved = nodes[:, perm]
            dist = np.abs(moved[:, None, :] - nodes[None, :, :]).max(axis=2)
            match = dist.argmin(axis=1)
            assert np.allclose(dist.min(axis=1), 0, atol=1e-15)
            assert np.allclose(qr.weights[match], qr.weights)


def test_edge_rule_point_count():
    assert gauss_legendre_01(3)[0].size == 3
    assert quadrature_of_order(5, "1D").n_nodes == 3
    assert quadrature_of_order(1, "1D").n_nodes == 1


def test_dimension_aliases():
    assert quadrature_of_order(3, 1) is quadrature_of_order(3, "1D")
    with pytest.raises(ValueError):
        quadrature_of_order(3, "3D")
    with pytest.raises(ValueError):
        quadrature_of_order(0)
    with pytest.raises(ValueError):
        quadrature_of_order(2.5)


def test_barycentric_validation():
    with pytest.raises(ValueError, match="sum"):
        Barycentric([[0.5, 0.6, 0.0]])
    with pytest.raises(ValueError):
        Barycentric([[1.5, -0.5, 0.0]])
    b = Barycentric.from_reference(np.array([[0.25, 0.5]]))
    assert np.allclose(b.coords, [[0.25, 0.25, 0.5]])
    assert Barycentric.from_reference(np.array([0.25])).dim == 1


def test_barycentric_does_not_freeze_caller_array():
    data = np.array([[1.0, 0.0, 0.0]])
    Barycentric(data)
    data[0, 0] = 1.0  # still writable
