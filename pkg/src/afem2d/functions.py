"""Evaluable functions over a mesh.

Every evaluation returns an array indexed ``(component, entity, node)``:
components of vector/matrix data first (matrices column-major), then
elements or edges, then barycentric nodes.
"""
from __future__ import annotations

import numpy as np

from .quadrature import Barycentric


class NoEdgeTraceError(TypeError):
    """The function is not continuous across edges, so it has no edge trace."""


class StaleFunctionError(RuntimeError):
    """The function's data belongs to an older mesh generation."""


def as_bary(bary, dim):
    if isinstance(bary, Barycentric):
        if bary.dim != dim:
            raise ValueError(f"expected {dim}D barycentric coordinates, got {bary.dim}D")
        return bary.coords
    if hasattr(bary, "bary"):  # quadrature rule
        return as_bary(bary.bary, dim)
    return Barycentric(bary, dim=dim).coords


def _as_index(idx, n):
    if idx is None or (isinstance(idx, str) and idx == ":"):
        return np.arange(n)
    if isinstance(idx, slice):
        return np.arange(n)[idx]
    idx = np.asarray(idx)
    if idx.dtype == bool:
        return np.flatnonzero(idx)
    return idx.astype(np.int64, copy=False).ravel()


def _to_batch(value, n, nq, what="function"):
    value = np.asarray(value)
    if value.dtype == bool:
        value = value.astype(float)
    if value.ndim == 2:
        value = value[None]
    if value.ndim != 3:
        raise ValueError(f"{what} must return a (components, entities, nodes) array, got shape {value.shape}")
    if value.shape[1:] != (n, nq):
        value = np.broadcast_to(value, (value.shape[0], n, nq))
    return value


class Evaluable:
    """Base class: a (possibly vector- or matrix-valued) function on ``mesh``."""

    mesh = None
    shape = (1, 1)

    @property
    def n_components(self):
        return self.shape[0] * self.shape[1]

    def eval(self, bary, idx=None):
        """Values at ``bary`` on the elements ``idx`` (all if None)."""
        raise NotImplementedError

    def eval_edge(self, bary, idx=None):
        """Values at 1D ``bary`` on the edges ``idx`` (all if None)."""
        raise NoEdgeTraceError(f"{type(self).__name__} has no edge trace")

    @property
    def has_edge_trace(self):
        return False

    def __call__(self, bary, idx=None):
        return self.eval(bary, idx)


class Constant(Evaluable):
    """Constant scalar, vector, or matrix (stored column-major)."""

    def __init__(self, mesh, value):
        self.mesh = mesh
        value = np.asarray(value, dtype=float)
        if value.ndim == 0:
            self.shape = (1, 1)
        elif value.ndim == 1:
            self.shape = (value.size, 1)
        elif value.ndim == 2:
            self.shape = value.shape
        else:
            raise ValueError("constant must be scalar, vector or matrix")
        self.value = value.ravel(order="F")

    def _batch(self, n, nq):
        return np.broadcast_to(self.value[:, None, None], (self.value.size, n, nq))

    def eval(self, bary, idx=None):
        coords = as_bary(bary, 2)
        return self._batch(_as_index(idx, self.mesh.n_elements).size, coords.shape[0])

    def eval_edge(self, bary, idx=None):
        coords = as_bary(bary, 1)
        return self._batch(_as_index(idx, self.mesh.n_edges).size, coords.shape[0])

    @property
    def has_edge_trace(self):
        return True

    def __repr__(self):
        return f"Constant({self.value.tolist()})"


class MeshFunction(Evaluable):
    """Function of the Cartesian coordinate.

    ``func`` receives ``x`` of shape ``(2, n, nq)`` and returns the values as
    ``(components, n, nq)`` (or ``(n, nq)`` for scalars).
    """

    def __init__(self, mesh, func, shape=(1, 1)):
        self.mesh = mesh
        self.func = func
        self.shape = (shape, 1) if isinstance(shape, int) else tuple(shape)

    def _check(self, value):
        if value.shape[0] != self.n_components:
            raise ValueError(f"mesh function returned {value.shape[0]} components, "
                             f"declared {self.n_components}")
        return value

    def eval(self, bary, idx=None):
        coords = as_bary(bary, 2)
        idx = _as_index(idx, self.mesh.n_elements)
        x = self.mesh.bary_to_cartesian(coords, idx)
        return self._check(_to_batch(self.func(x), idx.size, coords.shape[0]))

    def eval_edge(self, bary, idx=None):
        coords = as_bary(bary, 1)
        idx = _as_index(idx, self.mesh.n_edges)
        x = self.mesh.bary_to_cartesian_edge(coords, idx)
        return self._check(_to_batch(self.func(x), idx.size, coords.shape[0]))

    @property
    def has_edge_trace(self):
        return True


class CompositeFunction(Evaluable):
    """Pointwise combination ``func(*[arg.eval(...) for arg in args])``.

    All arguments are evaluated on the same batch before ``func`` is applied.
    """

    def __init__(self, func, *args, shape=None):
        if not args:
            raise ValueError("composite function needs at least one argument")
        self.func = func
        self.args = args
        self.mesh = args[0].mesh
        for a in args:
            if a.mesh is not self.mesh:
                raise ValueError("composite arguments live on different meshes")
        self._declared = None if shape is None else ((shape, 1) if isinstance(shape, int) else tuple(shape))
        self._shape = self._declared

    @property
    def shape(self):
        if self._shape is None:
            # probe at the centroid of the first element
            val = self.eval(np.array([[1 / 3, 1 / 3, 1 / 3]]), [0])
            self._shape = (val.shape[0], 1)
        return self._shape

    def _apply(self, values, n, nq):
        out = _to_batch(self.func(*values), n, nq, what="composite function")
        if self._declared is not None and out.shape[0] != self._declared[0] * self._declared[1]:
            raise ValueError(f"composite returned {out.shape[0]} components, declared {self._declared}")
        return out

    def eval(self, bary, idx=None):
        coords = as_bary(bary, 2)
        idx = _as_index(idx, self.mesh.n_elements)
        values = [a.eval(coords, idx) for a in self.args]
        return self._apply(values, idx.size, coords.shape[0])

    def eval_edge(self, bary, idx=None):
        coords = as_bary(bary, 1)
        idx = _as_index(idx, self.mesh.n_edges)
        values = [a.eval_edge(coords, idx) for a in self.args]
        return self._apply(values, idx.size, coords.shape[0])

    @property
    def has_edge_trace(self):
        return all(a.has_edge_trace for a in self.args)


def evaluate(f: Evaluable, bary, idx=None):
    return f.eval(bary, idx)


def evaluate_edge(f: Evaluable, bary, idx=None):
    return f.eval_edge(bary, idx)
