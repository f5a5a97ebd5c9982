"""Transfer of finite element functions from a coarse to a refined mesh.

Usage::

    P = Prolongation(u.space)
    mesh.refine_locally(marked)
    u.set_data(P.prolongate(u))

The matrix is built from ``mesh.last_refinement`` on first use after a
refinement.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .quadrature import Barycentric
from .refinement import CHILD_BARYCENTRICS
from .space import FeFunction, FeSpace, build_dof_maps


class ProlongationError(RuntimeError):
    pass


class Prolongation:
    """Prolongation by element-wise Lagrange interpolation (any order)."""

    def __init__(self, space: FeSpace):
        self.space = space
        self._matrix = None
        self._record = None

    def _current_record(self):
        record = self.space.mesh.last_refinement
        if record is None or record.generation_after != self.space.mesh.generation:
            raise ProlongationError("no refinement record for the current mesh generation")
        return record

    @property
    def matrix(self) -> sp.csr_matrix:
        record = self._current_record()
        if self._record is not record:
            self._matrix = self._build(record)
            self._record = record
        return self._matrix

    def _build(self, record):
        element = self.space.element
        coarse = build_dof_maps(record.coarse, element, self.space.dirichlet)
        fine = self.space.maps
        nodes = element.nodes.coords  # (nloc, 3) in child barycentrics
        rows, cols, vals = [], [], []
        fine_e2d = fine.element2dofs
        # first occurrence of every fine DOF in element order
        _, first = np.unique(fine_e2d.ravel(), return_index=True)
        owner = np.zeros(fine_e2d.size, dtype=bool)
        owner[first] = True
        owner = owner.reshape(fine_e2d.shape)
        for code in np.unique(record.child_code):
            sel = np.flatnonzero(record.child_code == code)
            parent_bary = nodes @ CHILD_BARYCENTRICS[code]  # (nloc, 3)
            phi = element.evaluate(Barycentric(np.clip(parent_bary, 0, 1)), "value")[:, 0, :]
            phi = np.where(np.abs(phi) < 1e-13, 0.0, phi)  # (nloc_coarse, nloc_fine)
            local = phi.T  # [fine node i, coarse basis l]
            own = owner[sel]  # (n, nloc)
            t_idx, i_idx = np.nonzero(own)
            r = fine_e2d[sel][t_idx, i_idx]
            c_dofs = coarse.element2dofs[record.parent[sel]][t_idx]  # (m, nloc)
            v = local[i_idx]  # (m, nloc)
            nz = v != 0
            rows.append(np.broadcast_to(r[:, None], v.shape)[nz])
            cols.append(c_dofs[nz])
            vals.append(v[nz])
        rows = np.concatenate(rows)
        cols = np.concatenate(cols)
        vals = np.concatenate(vals)
        return sp.csr_matrix((vals, (rows, cols)), shape=(fine.n_dofs, coarse.n_dofs))

    def prolongate(self, u: FeFunction):
        record = self._current_record()
        if u.generation != record.generation_before:
            raise ProlongationError("function does not live on the pre-refinement mesh")
        data = u.data
        if data.shape[0] != self.matrix.shape[1]:
            raise ProlongationError("coefficient vector does not match the coarse space")
        return self.matrix @ data


class LoFeProlongation(Prolongation):
    """Specialised prolongation for P1 (continuous) and P0 (discontinuous) elements."""

    def __init__(self, space: FeSpace):
        el = space.element
        if not ((el.family == "H1" and el.order == 1) or (el.family == "L2" and el.order == 0)):
            raise ValueError("LoFeProlongation supports only P1-H1 and P0-L2 elements")
        super().__init__(space)

    def _build(self, record):
        el = self.space.element
        if el.family == "L2":
            n_fine = record.parent.size
            n_coarse = record.coarse.n_elements
            return sp.csr_matrix((np.ones(n_fine), (np.arange(n_fine), record.parent)),
                                 shape=(n_fine, n_coarse))
        nV = record.coarse.n_vertices
        n_fine = self.space.mesh.n_vertices
        split = np.flatnonzero(record.bisected_edges)
        mids = record.edge_midpoint[split]
        ends = record.coarse.edges[split]
        rows = np.concatenate([np.arange(nV), mids, mids])
        cols = np.concatenate([np.arange(nV), ends[:, 0], ends[:, 1]])
        vals = np.concatenate([np.ones(nV), np.full(2 * mids.size, 0.5)])
        # Bisec5 interior points: (P1 + P2)/4 + P3/2
        interior = n_fine - nV - mids.size
        if interior:
            b5 = np.flatnonzero(record.rules == 5)
            verts = record.coarse.elements[b5]
            ids = nV + mids.size + np.arange(b5.size)
            rows = np.concatenate([rows, ids, ids, ids])
            cols = np.concatenate([cols, verts[:, 0], verts[:, 1], verts[:, 2]])
            vals = np.concatenate([vals, np.full(b5.size, .25), np.full(b5.size, .25), np.full(b5.size, .5)])
        return sp.csr_matrix((vals, (rows, cols)), shape=(n_fine, nV))
