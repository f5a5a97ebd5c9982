"""Lagrange finite elements of arbitrary order on the reference triangle.

The basis is built from Bernstein polynomials, evaluated with the recurrence
``B^d_a = sum_i lambda_i B^{d-1}_{a - e_i}``, and converted once to the nodal
(Lagrange) basis on the equispaced lattice ``a / p``.

Local DOF order: the three vertices, then the interior nodes of local edges
0, 1, 2 (edge ``j`` runs from vertex ``j`` to ``j+1``, nodes ordered in that
direction), then element-interior nodes.
"""
from __future__ import annotations

from itertools import product

import numpy as np

from .quadrature import Barycentric

# d/dx_a = sum_i D[a, i] d/dlambda_i  for lambda = (1 - x1 - x2, x1, x2)
_D = np.array([[-1.0, 1.0, 0.0], [-1.0, 0.0, 1.0]])


def multi_indices(degree):
    """All ``(a0, a1, a2)`` with ``a0 + a1 + a2 == degree``."""
    return [a for a in product(range(degree + 1), repeat=3) if sum(a) == degree]


def bernstein(degree, lam):
    """Bernstein polynomials of ``degree`` at barycentrics ``lam`` (n, 3).

    Returns a dict multi-index -> values (n,).
    """
    n = lam.shape[0]
    current = {(0, 0, 0): np.ones(n)}
    for d in range(1, degree + 1):
        nxt = {}
        for a in multi_indices(d):
            val = np.zeros(n)
            for i in range(3):
                if a[i] > 0:
                    b = list(a)
                    b[i] -= 1
                    val = val + lam[:, i] * current[tuple(b)]
            nxt[a] = val
        current = nxt
    return current


def lagrange_node_indices(p):
    """Multi-indices of the Lagrange nodes in local DOF order."""
    if p == 0:
        return []
    nodes = [tuple(p if i == j else 0 for i in range(3)) for j in range(3)]
    for j in range(3):
        k = (j + 1) % 3
        for m in range(1, p):
            a = [0, 0, 0]
            a[j], a[k] = p - m, m
            nodes.append(tuple(a))
    nodes.extend(sorted((a for a in multi_indices(p) if min(a) >= 1), reverse=True))
    return nodes


class FiniteElement:
    """Lagrange element of order ``order``; ``family`` is ``'H1'`` or ``'L2'``."""

    def __init__(self, family, order):
        if family not in ("H1", "L2"):
            raise ValueError("family must be 'H1' or 'L2'")
        if order < (1 if family == "H1" else 0):
            raise ValueError(f"invalid order {order} for {family} element")
        self.family = family
        self.order = p = int(order)
        if p == 0:
            self._alphas = [(0, 0, 0)]
            nodes = np.array([[1 / 3, 1 / 3, 1 / 3]])
        else:
            self._alphas = multi_indices(p)
            nodes = np.array(lagrange_node_indices(p), dtype=float) / p
        self.nodes = Barycentric(nodes, dim=2)
        self.n_local = nodes.shape[0]
        if family == "H1":
            self.dofs_per_vertex, self.dofs_per_edge = 1, p - 1
            self.dofs_per_element = (p - 1) * (p - 2) // 2
        else:
            self.dofs_per_vertex, self.dofs_per_edge = 0, 0
            self.dofs_per_element = self.n_local
        # Bernstein -> nodal change of basis
        V = self._bernstein_matrix(nodes, p)
        self._coeffs = np.linalg.inv(V)
        self._cache = {}

    def _bernstein_matrix(self, lam, degree, alphas=None):
        alphas = self._alphas if alphas is None else alphas
        B = bernstein(degree, lam)
        return np.column_stack([B[a] for a in alphas])

    def _bary_derivative(self, lam, order):
        """Barycentric derivatives of the Bernstein basis: (n, nB, 3**order)."""
        p = self.order
        n = lam.shape[0]
        if order > p:
            return np.zeros((n, len(self._alphas), 3 ** order))
        B = bernstein(p - order, lam)
        scale = np.prod(np.arange(p - order + 1, p + 1, dtype=float))
        out = np.zeros((n, len(self._alphas), 3 ** order))
        for col, a in enumerate(self._alphas):
            for flat, dirs in enumerate(product(range(3), repeat=order)):
                b = list(a)
                for i in dirs:
                    b[i] -= 1
                if min(b) >= 0:
                    out[:, col, flat] = scale * B[tuple(b)]
        return out

    def evaluate(self, bary, derivative="value"):
        """Reference basis at ``bary``: shape ``(n_local, components, n_nodes)``.

        ``derivative`` is ``'value'`` (1 component), ``'gradient'`` (2) or
        ``'hessian'`` (4, column-major), all w.r.t. reference coordinates.
        """
        lam = bary.coords if isinstance(bary, Barycentric) else np.atleast_2d(np.asarray(bary, dtype=float))
        key = (lam.tobytes(), lam.shape, derivative)
        cached = self._cache.get(key)
        if cached is not None:
            return cached
        C = self._coeffs
        if derivative == "value":
            out = (self._bernstein_matrix(lam, self.order) @ C).T[:, None, :]
        elif derivative == "gradient":
            dB = self._bary_derivative(lam, 1)  # (n, nB, 3)
            ref = np.einsum("ai,nbi->nba", _D, dB)
            out = np.einsum("nba,bl->lan", ref, C)
        elif derivative == "hessian":
            d2 = self._bary_derivative(lam, 2).reshape(lam.shape[0], -1, 3, 3)
            ref = np.einsum("ai,cj,nbij->nbac", _D, _D, d2)  # (n, nB, 2, 2)
            # column-major flattening of the 2x2 Hessian: (h11, h21, h12, h22)
            ref = ref.transpose(0, 1, 3, 2).reshape(lam.shape[0], -1, 4)
            out = np.einsum("nba,bl->lan", ref, C)
        else:
            raise ValueError(f"unknown derivative '{derivative}'")
        out = np.ascontiguousarray(out)
        out.setflags(write=False)
        if len(self._cache) < 256:
            self._cache[key] = out
        return out

    def edge_dofs(self, local_edge):
        """Local DOF indices on ``local_edge``, ordered from its first to its second vertex."""
        if self.family == "L2":
            raise ValueError("L2 elements have no edge trace")
        j, k = local_edge, (local_edge + 1) % 3
        inner = 3 + local_edge * self.dofs_per_edge + np.arange(self.dofs_per_edge)
        return np.concatenate([[j], inner, [k]]).astype(np.int64)

    def evaluate_edge(self, bary):
        """Edge trace basis on the reference edge: ``(p + 1, n_nodes)``.

        Rows follow :meth:`edge_dofs` of local edge 0; the edge point is
        ``l0 * start + l1 * end``.
        """
        lam = bary.coords if isinstance(bary, Barycentric) else np.atleast_2d(bary)
        el = np.zeros((lam.shape[0], 3))
        el[:, 0], el[:, 1] = lam[:, 0], lam[:, 1]
        return self.evaluate(Barycentric(el, dim=2))[self.edge_dofs(0), 0, :]

    def __repr__(self):
        return f"{self.family}Lagrange(p={self.order})"

    def __eq__(self, other):
        return isinstance(other, FiniteElement) and (self.family, self.order) == (other.family, other.order)

    def __hash__(self):
        return hash((self.family, self.order))


def LagrangeH1(p) -> FiniteElement:
    return FiniteElement("H1", p)


def LagrangeL2(p) -> FiniteElement:
    return FiniteElement("L2", p)


def LowestOrderH1() -> FiniteElement:
    return FiniteElement("H1", 1)


def LowestOrderL2() -> FiniteElement:
    return FiniteElement("L2", 0)


def reference_basis(element: FiniteElement, bary, derivative="value"):
    return element.evaluate(bary, derivative)
