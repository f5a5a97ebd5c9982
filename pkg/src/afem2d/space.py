"""Finite element spaces, finite element functions and their derivatives."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elements import FiniteElement
from .functions import Evaluable, StaleFunctionError, _as_index, as_bary
from .integration import edge_to_element_bary
from .mesh import Mesh, MeshError


@dataclass(frozen=True)
class DofMaps:
    element2dofs: np.ndarray
    edge2dofs: np.ndarray | None
    n_dofs: int
    free_dofs: np.ndarray
    generation: int


def build_dof_maps(mesh: Mesh, element: FiniteElement, dirichlet) -> DofMaps:
    nV, nE, nT = mesh.n_vertices, mesh.n_edges, mesh.n_elements
    if element.family == "L2":
        n_dofs = nT * element.n_local
        e2d = np.arange(n_dofs, dtype=np.int64).reshape(nT, element.n_local)
        return DofMaps(e2d, None, n_dofs, np.arange(n_dofs), mesh.generation)

    k = element.dofs_per_edge
    m = element.dofs_per_element
    n_dofs = nV + k * nE + m * nT
    e2d = np.empty((nT, element.n_local), dtype=np.int64)
    e2d[:, :3] = mesh.elements
    if k:
        base = nV + k * mesh.element2edges  # (nT, 3)
        steps = np.arange(k)
        for j in range(3):
            forward = mesh.element_edge_orientation[:, j]
            idx = np.where(forward[:, None], steps, k - 1 - steps)
            e2d[:, 3 + j * k:3 + (j + 1) * k] = base[:, j, None] + idx
    if m:
        e2d[:, 3 + 3 * k:] = nV + k * nE + np.arange(nT)[:, None] * m + np.arange(m)
    edge2dofs = np.empty((nE, k + 2), dtype=np.int64)
    edge2dofs[:, 0] = mesh.edges[:, 0]
    edge2dofs[:, -1] = mesh.edges[:, 1]
    if k:
        edge2dofs[:, 1:-1] = nV + k * np.arange(nE)[:, None] + np.arange(k)
    fixed = np.zeros(n_dofs, dtype=bool)
    dirichlet_edges = mesh.boundary_edge_indices(dirichlet)
    fixed[edge2dofs[dirichlet_edges].ravel()] = True
    return DofMaps(e2d, edge2dofs, n_dofs, np.flatnonzero(~fixed), mesh.generation)


class FeSpace:
    """A finite element bound to a mesh.

    DOF maps are rebuilt lazily whenever the mesh generation changes.

    Parameters
    ----------
    mesh : Mesh
    element : FiniteElement
    dirichlet : iterable of int or None
        0-based boundary parts carrying homogeneous Dirichlet conditions.
        ``None`` (default) selects every part; ``()`` none.
    """

    def __init__(self, mesh: Mesh, element: FiniteElement, dirichlet=None):
        self.mesh = mesh
        self.element = element
        if dirichlet is None:
            dirichlet = range(len(mesh.boundaries))
        elif isinstance(dirichlet, (int, np.integer)):
            dirichlet = [int(dirichlet)]
        self.dirichlet = tuple(int(d) for d in dirichlet)
        for d in self.dirichlet:
            if d < 0 or d >= len(mesh.boundaries):
                raise MeshError(f"unknown boundary part {d}")
        self._maps = None

    @property
    def maps(self) -> DofMaps:
        if self._maps is None or self._maps.generation != self.mesh.generation:
            self._maps = build_dof_maps(self.mesh, self.element, self.dirichlet)
        return self._maps

    @property
    def element2dofs(self):
        return self.maps.element2dofs

    @property
    def edge2dofs(self):
        return self.maps.edge2dofs

    @property
    def n_dofs(self):
        return self.maps.n_dofs

    @property
    def free_dofs(self):
        return self.maps.free_dofs

    def on(self, mesh: Mesh) -> "FeSpace":
        """The same element and Dirichlet selection on another mesh."""
        return FeSpace(mesh, self.element, self.dirichlet)

    def __repr__(self):
        return f"FeSpace({self.element!r}, nDofs={self.n_dofs})"


def build_fe_space(mesh, element, dirichlet=None) -> FeSpace:
    return FeSpace(mesh, element, dirichlet)


class FeFunction(Evaluable):
    """Coefficient vector over an :class:`FeSpace`.

    The data is tied to the mesh generation at which it was set; evaluating it
    after a refinement raises :class:`StaleFunctionError` until new data
    (e.g. a prolongation) is set.
    """

    def __init__(self, space: FeSpace, data=None):
        self.space = space
        self.mesh = space.mesh
        self.shape = (1, 1)
        self.set_data(0.0 if data is None else data)

    @property
    def data(self):
        return self._data

    @property
    def generation(self):
        return self._generation

    def set_data(self, data):
        n = self.space.n_dofs
        data = np.asarray(data, dtype=float)
        if data.ndim == 0:
            data = np.full(n, float(data))
        if data.shape != (n,):
            raise ValueError(f"expected {n} coefficients, got shape {data.shape}")
        self._data = data.copy()
        self._generation = self.mesh.generation

    def set_free_data(self, values):
        self._check_current()
        free = self.space.free_dofs
        values = np.asarray(values, dtype=float)
        if values.shape != free.shape:
            raise ValueError(f"expected {free.size} free coefficients, got {values.shape}")
        self._data[free] = values

    def _check_current(self):
        if self._generation != self.mesh.generation:
            raise StaleFunctionError(
                f"function data is for mesh generation {self._generation}, "
                f"mesh is at {self.mesh.generation}")

    def _local(self, idx):
        self._check_current()
        return self._data[self.space.element2dofs[idx]]

    def eval(self, bary, idx=None):
        coords = as_bary(bary, 2)
        idx = _as_index(idx, self.mesh.n_elements)
        phi = self.space.element.evaluate(coords, "value")[:, 0, :]  # (nloc, nq)
        return (self._local(idx) @ phi)[None]

    def eval_edge(self, bary, idx=None):
        if self.space.element.family != "H1":
            return super().eval_edge(bary, idx)
        coords = as_bary(bary, 1)
        idx = _as_index(idx, self.mesh.n_edges)
        self._check_current()
        trace = self.space.element.evaluate_edge(coords)  # (p+1, nq)
        return (self._data[self.space.edge2dofs[idx]] @ trace)[None]

    @property
    def has_edge_trace(self):
        return self.space.element.family == "H1"

    def __repr__(self):
        return f"FeFunction({self.space!r})"


class Gradient(Evaluable):
    """Element-wise gradient of an :class:`FeFunction` (2 components)."""

    shape = (2, 1)

    def __init__(self, u: FeFunction):
        self.u = u
        self.mesh = u.mesh

    def eval(self, bary, idx=None):
        coords = as_bary(bary, 2)
        idx = _as_index(idx, self.mesh.n_elements)
        grads = self.u.space.element.evaluate(coords, "gradient")  # (nloc, 2, nq)
        ref = np.einsum("tl,laq->taq", self.u._local(idx), grads)
        B = self.mesh.affine_transformation().DFinvT[idx]
        return np.einsum("tab,tbq->atq", B, ref)


class Hessian(Evaluable):
    """Element-wise Hessian of an :class:`FeFunction` (4 components, column-major)."""

    shape = (2, 2)

    def __init__(self, u: FeFunction):
        self.u = u
        self.mesh = u.mesh

    def eval(self, bary, idx=None):
        coords = as_bary(bary, 2)
        idx = _as_index(idx, self.mesh.n_elements)
        hess = self.u.space.element.evaluate(coords, "hessian")  # (nloc, 4, nq)
        ref = np.einsum("tl,laq->taq", self.u._local(idx), hess)
        ref = ref.reshape(idx.size, 2, 2, -1, order="F")  # [t, row, col, q]
        B = self.mesh.affine_transformation().DFinvT[idx]
        phys = np.einsum("tab,tbcq,tdc->tadq", B, ref, B)
        return phys.reshape(idx.size, 4, -1, order="F").transpose(1, 0, 2)


def nodal_interpolation(f: Evaluable, space: FeSpace):
    """Coefficients of the Lagrange interpolant of scalar ``f``.

    Shared nodes take the value from the adjacent element of lowest index.
    """
    if f.n_components != 1:
        raise ValueError("nodal interpolation needs a scalar function")
    values = f.eval(space.element.nodes)[0]  # (nT, nloc)
    dofs = space.element2dofs.ravel()
    _, first = np.unique(dofs, return_index=True)
    out = np.zeros(space.n_dofs)
    out[dofs[first]] = values.ravel()[first]
    return out


def element_basis_on_edges(space: FeSpace, bary, edges, side=0):
    """Basis values of the side-``side`` element restricted to ``edges``.

    Returns the element indices ``(n,)``, their local DOF values
    ``(n, nloc, nq)``; edges without that neighbour are dropped.
    """
    mesh = space.mesh
    coords = as_bary(bary, 1)
    elem = mesh.edge2elements[edges, side]
    local = mesh.edge2local[edges, side]
    keep = elem >= 0
    edges, elem, local = np.asarray(edges)[keep], elem[keep], local[keep]
    phi = np.empty((edges.size, space.element.n_local, coords.shape[0]))
    for j in range(3):
        sel = local == j
        if sel.any():
            lam = edge_to_element_bary(coords, j, reverse=(side == 1))
            phi[sel] = space.element.evaluate(lam, "value")[:, 0, :]
    return edges, elem, phi
