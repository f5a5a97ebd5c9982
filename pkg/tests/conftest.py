import numpy as np
import pytest

from afem2d import Mesh, load_geometry

# Criss-cross square: four triangles around the centre (0.5, 0.5)
CRISS_CROSS_COORDINATES = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]])
CRISS_CROSS_ELEMENTS = np.array([[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]])
CRISS_CROSS_BOUNDARIES = [np.array([[0, 1], [3, 0]]), np.array([[1, 2], [2, 3]])]


@pytest.fixture
def criss_cross():
    return load_geometry("criss_cross")


@pytest.fixture
def lshape():
    return load_geometry("Lshape")


@pytest.fixture
def unitsquare():
    return load_geometry("unitsquare")


def euler_characteristic(mesh):
    return mesh.n_vertices - mesh.n_edges + mesh.n_elements


def assert_conforming(mesh):
    """Every interior edge has two neighbours with opposite orientation, and no
    vertex lies in the interior of an edge."""
    e2e = mesh.edge2elements
    interior = e2e[:, 1] >= 0
    assert np.all(mesh.is_boundary_edge() == ~interior)
    # every edge appears in element2edges once per neighbour
    counts = np.bincount(mesh.element2edges.ravel(), minlength=mesh.n_edges)
    assert np.array_equal(counts, np.where(interior, 2, 1))
    # no hanging vertices: no vertex is the midpoint of an edge
    x = np.round(mesh.coordinates, 12)
    mids = np.round(0.5 * (x[mesh.edges[:, 0]] + x[mesh.edges[:, 1]]), 12)
    assert not np.isin(mids[:, 0] + 1j * mids[:, 1], x[:, 0] + 1j * x[:, 1]).any()


def square_with_left_dirichlet(refinements):
    coordinates = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    elements = np.array([[0, 1, 2], [2, 3, 0]])
    mesh = Mesh(coordinates, elements, [np.array([[3, 0]]), np.array([[0, 1], [1, 2], [2, 3]])])
    mesh.refine_uniform(refinements)
    return mesh


def patch_solution(p):
    """``u = x (1 + x + 2y)^(p-1)`` with its Laplacian and outward flux on the square."""
    m = p - 1

    def u(x):
        return x[0] * (1 + x[0] + 2 * x[1]) ** m

    def grad(x):
        s = 1 + x[0] + 2 * x[1]
        d = m * s ** (m - 1.0) if m else 0 * s
        return s ** m + x[0] * d, 2 * x[0] * d

    def laplace(x):
        s = 1 + x[0] + 2 * x[1]
        first = 2 * m * s ** (m - 1.0) if m else 0 * s
        second = 5 * x[0] * m * (m - 1) * s ** (m - 2.0) if m > 1 else 0 * s
        return first + second

    def flux(x):
        gx, gy = grad(x)
        right = x[0] > 1 - 1e-12
        bottom = x[1] < 1e-12
        return np.where(right, gx, np.where(bottom, -gy, gy))

    return u, laplace, flux
