import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from afem2d import Barycentric, LagrangeH1, LagrangeL2, LowestOrderL2
from afem2d.elements import bernstein, lagrange_node_indices, multi_indices

CENTROID = Barycentric([[1 / 3, 1 / 3, 1 / 3]])


def random_points(seed, n=7):
    lam = np.random.default_rng(seed).dirichlet(np.ones(3), size=n)
    return Barycentric(lam)


@pytest.mark.parametrize("p", range(1, 6))
def test_nodal_basis(p):
    el = LagrangeH1(p)
    values = el.evaluate(el.nodes)[:, 0, :]
    assert np.allclose(values, np.eye(el.n_local), atol=1e-13)


@pytest.mark.parametrize("p", range(1, 6))
def test_partition_of_unity_and_gradients_sum_to_zero(p):
    el = LagrangeH1(p)
    pts = random_points(p)
    assert np.allclose(el.evaluate(pts).sum(axis=0), 1.0)
    assert np.allclose(el.evaluate(pts, "gradient").sum(axis=0), 0.0, atol=1e-11)
    assert np.allclose(el.evaluate(pts, "hessian").sum(axis=0), 0.0, atol=1e-9)


def test_p2_values_at_centroid():
    values = LagrangeH1(2).evaluate(CENTROID)[:, 0, 0]
    assert np.allclose(values, [-1 / 9] * 3 + [4 / 9] * 3)


def test_dof_counts():
    assert [LagrangeH1(p).n_local for p in range(1, 5)] == [3, 6, 10, 15]
    el = LagrangeH1(4)
    assert (el.dofs_per_vertex, el.dofs_per_edge, el.dofs_per_element) == (1, 3, 3)
    assert LowestOrderL2().n_local == 1
    assert LagrangeL2(2).dofs_per_element == 6


def test_node_order_vertices_edges_interior():
    nodes = lagrange_node_indices(3)
    assert nodes[:3] == [(3, 0, 0), (0, 3, 0), (0, 0, 3)]
    # edge 0 runs from vertex 0 to vertex 1
    assert nodes[3:5] == [(2, 1, 0), (1, 2, 0)]
    assert nodes[-1] == (1, 1, 1)


def test_bernstein_partition_of_unity():
    lam = random_points(3).coords
    B = bernstein(4, lam)
    assert len(B) == len(multi_indices(4)) == 15
    assert np.allclose(sum(B.values()), 1.0)


@settings(max_examples=30, deadline=None)
@given(p=st.integers(1, 5), seed=st.integers(0, 10 ** 6))
def test_polynomials_are_reproduced(p, seed):
    """Interpolating a degree-p polynomial reproduces it with its derivatives."""
    rng = np.random.default_rng(seed)
    coeffs = rng.normal(size=(p + 1, p + 1))

    def poly(x, y):
        return sum(coeffs[i, j] * x ** i * y ** j for i in range(p + 1) for j in range(p + 1 - i))

    def grad(x, y):
        gx = sum(i * coeffs[i, j] * x ** (i - 1) * y ** j for i in range(1, p + 1) for j in range(p + 1 - i))
        gy = sum(j * coeffs[i, j] * x ** i * y ** (j - 1) for i in range(p + 1) for j in range(1, p + 1 - i))
        return gx, gy

    el = LagrangeH1(p)
    nodes = el.nodes.coords
    dofs = poly(nodes[:, 1], nodes[:, 2])
    pts = random_points(seed)
    x, y = pts.coords[:, 1], pts.coords[:, 2]
    assert np.allclose(dofs @ el.evaluate(pts)[:, 0, :], poly(x, y))
    g = np.einsum("l,laq->aq", dofs, el.evaluate(pts, "gradient"))
    assert np.allclose(g, np.stack(grad(x, y)), atol=1e-9)


def test_hessian_layout_is_column_major():
    el = LagrangeH1(2)
    nodes = el.nodes.coords
    x, y = nodes[:, 1], nodes[:, 2]
    dofs = x ** 2 + 3 * x * y + 5 * y ** 2
    H = np.einsum("l,laq->aq", dofs, el.evaluate(CENTROID, "hessian"))[:, 0]
    assert np.allclose(H, [2.0, 3.0, 3.0, 10.0])


def test_edge_trace():
    el = LagrangeH1(3)
    assert list(el.edge_dofs(1)) == [1, 5, 6, 2]
    t = Barycentric([[0.3, 0.7]], dim=1)
    trace = el.evaluate_edge(t)
    assert trace.shape == (4, 1)
    assert np.isclose(trace.sum(), 1.0)
    with pytest.raises(ValueError):
        LowestOrderL2().edge_dofs(0)


def test_invalid_elements():
    with pytest.raises(ValueError):
        LagrangeH1(0)
    with pytest.raises(ValueError):
        LagrangeL2(-1)
    with pytest.raises(ValueError):
        LagrangeH1(1).evaluate(CENTROID, "laplacian")


def test_results_are_read_only():
    values = LagrangeH1(2).evaluate(CENTROID)
    with pytest.raises(ValueError):
        values[0, 0, 0] = 1.0
