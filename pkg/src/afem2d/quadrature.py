"""Barycentric coordinates and quadrature rules on the reference edge and triangle."""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from itertools import permutations

import numpy as np


class Barycentric:
    """A collection of barycentric coordinates on a ``dim``-simplex.

    ``coords`` has shape ``(n_nodes, dim + 1)``; each row sums to one.
    """

    def __init__(self, coords, dim=None):
        coords = np.array(coords, dtype=float, ndmin=2)
        if dim is None:
            dim = coords.shape[1] - 1
        if dim not in (1, 2) or coords.shape[1] != dim + 1:
            raise ValueError(f"barycentric coordinates of a {dim}-simplex need {dim + 1} entries")
        if np.any(np.abs(coords.sum(axis=1) - 1) > 1e-14 * 4):
            raise ValueError("barycentric coordinates must sum to one")
        if np.any(coords < -1e-14) or np.any(coords > 1 + 1e-14):
            raise ValueError("barycentric coordinates must lie in [0, 1]")
        coords.setflags(write=False)
        self.coords = coords
        self.dim = dim

    @property
    def n_nodes(self):
        return self.coords.shape[0]

    @classmethod
    def from_reference(cls, points):
        """From points ``x`` on the reference triangle (or edge, if 1D)."""
        points = np.asarray(points, dtype=float)
        if points.ndim == 1:
            return cls(np.column_stack([points, 1 - points]), dim=1)
        return cls(np.column_stack([1 - points[:, 0] - points[:, 1], points[:, 0], points[:, 1]]), dim=2)

    def __len__(self):
        return self.n_nodes

    def __repr__(self):
        return f"Barycentric{self.dim}D(n_nodes={self.n_nodes})"


@dataclass(frozen=True)
class QuadratureRule:
    """Nodes in barycentric coordinates and weights summing to one."""

    bary: Barycentric
    weights: np.ndarray
    order: int

    @property
    def dim(self):
        return self.bary.dim

    @property
    def n_nodes(self):
        return self.weights.size

    @staticmethod
    def of_order(order, dim="2D") -> "QuadratureRule":
        return quadrature_of_order(order, dim)


def _orbit(*entries):
    """All distinct permutations of a barycentric tuple."""
    return sorted(set(permutations(entries)))


def _symmetric_rule(groups):
    nodes, weights = [], []
    for weight, entries in groups:
        orbit = _orbit(*entries)
        nodes.extend(orbit)
        weights.extend([weight] * len(orbit))
    return np.array(nodes), np.array(weights)


_S15 = math.sqrt(15.0)
# symmetric rules with positive weights and interior nodes, keyed by exactness order
_TRIANGLE_RULES = {
    1: [(1.0, (1 / 3, 1 / 3, 1 / 3))],
    2: [(1 / 3, (2 / 3, 1 / 6, 1 / 6))],
    4: [(0.223381589678011466, (0.108103018168070228, 0.445948490915964886, 0.445948490915964886)),
        (0.109951743655321868, (0.816847572980458513, 0.091576213509770743, 0.091576213509770743))],
    5: [(0.225, (1 / 3, 1 / 3, 1 / 3)),
        ((155 - _S15) / 1200, ((9 + 2 * _S15) / 21, (6 - _S15) / 21, (6 - _S15) / 21)),
        ((155 + _S15) / 1200, ((9 - 2 * _S15) / 21, (6 + _S15) / 21, (6 + _S15) / 21))],
}
_TRIANGLE_RULES[3] = _TRIANGLE_RULES[4]


def gauss_legendre_01(n):
    """``n``-point Gauss rule on [0, 1] with weights summing to one."""
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1) / 2, w / 2


@lru_cache(maxsize=None)
def _cached_rule(order, dim):
    if dim == 1:
        n = math.ceil((order + 1) / 2)
        x, w = gauss_legendre_01(n)
        return QuadratureRule(Barycentric(np.column_stack([x, 1 - x]), dim=1), w, order)
    if order in _TRIANGLE_RULES:
        nodes, weights = _symmetric_rule(_TRIANGLE_RULES[order])
        return QuadratureRule(Barycentric(nodes, dim=2), weights, order)
    # Duffy: (s, t) -> (s, t(1 - s)), Jacobian (1 - s); degree q in x becomes q + 1 in s
    n = math.ceil((order + 2) / 2)
    x, w = gauss_legendre_01(n)
    s, t = np.meshgrid(x, x, indexing="ij")
    ws, wt = np.meshgrid(w, w, indexing="ij")
    x1 = s.ravel()
    x2 = (t * (1 - s)).ravel()
    weights = 2 * (ws * wt * (1 - s)).ravel()
    return QuadratureRule(Barycentric.from_reference(np.column_stack([x1, x2])), weights, order)


def quadrature_of_order(order, dim="2D") -> QuadratureRule:
    """Quadrature rule exact for polynomials of total degree ``order``.

    ``dim`` is ``'1D'``/``1`` for edges or ``'2D'``/``2`` for triangles.
    """
    dim = {"1D": 1, "2D": 2, 1: 1, 2: 2}.get(dim)
    if dim is None:
        raise ValueError("dim must be '1D' or '2D'")
    if int(order) != order or order < 1:
        raise ValueError("quadrature order must be a positive integer")
    return _cached_rule(int(order), dim)
