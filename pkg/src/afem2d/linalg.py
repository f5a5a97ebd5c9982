"""Batched small-matrix products, triplet accumulation and sparse solves."""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SolverError(RuntimeError):
    pass


def _parse_size(size, n_comp):
    """``size`` is ``(rows, cols)`` or ``((rows, cols), transpose)``."""
    transpose = False
    if len(size) == 2 and isinstance(size[1], (bool, np.bool_)):
        size, transpose = size
    rows, cols = (int(s) for s in size)
    if rows * cols != n_comp:
        raise ValueError(f"size {rows}x{cols} does not match {n_comp} components")
    return rows, cols, transpose


def vector_product(A, B, size_a=None, size_b=None):
    """Per-entry matrix products of batched arrays.

    ``A`` and ``B`` have the flattened (column-major) matrix in axis 0 and
    broadcast over all trailing axes. ``size_a``/``size_b`` give the matrix
    shape, optionally as ``((rows, cols), True)`` to use the transpose. By
    default the dot product ``A^T B`` of the columns is computed.

    Example: ``vector_product(p, p, (2, 1), ((2, 1), True))`` is ``p p^T``.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if size_a is None and size_b is None:
        if A.shape[0] != B.shape[0]:
            raise ValueError("dot product needs equally many components")
        size_a = ((A.shape[0], 1), True)
        size_b = (B.shape[0], 1)
    ra, ca, ta = _parse_size(size_a, A.shape[0])
    rb, cb, tb = _parse_size(size_b, B.shape[0])
    Am = A.reshape((ra, ca) + A.shape[1:], order="F")
    Bm = B.reshape((rb, cb) + B.shape[1:], order="F")
    if ta:
        Am = np.swapaxes(Am, 0, 1)
    if tb:
        Bm = np.swapaxes(Bm, 0, 1)
    if Am.shape[1] != Bm.shape[0]:
        raise ValueError(f"inner dimensions do not match: {Am.shape[:2]} x {Bm.shape[:2]}")
    C = np.einsum("ik...,kj...->ij...", Am, Bm)
    return C.reshape((C.shape[0] * C.shape[1],) + C.shape[2:], order="F")


class SparseSystem:
    """Triplet buffer compressed to CSR on demand; duplicates are summed."""

    def __init__(self, n_rows, n_cols=None):
        self.shape = (int(n_rows), int(n_rows if n_cols is None else n_cols))
        self._rows, self._cols, self._vals = [], [], []

    def accumulate(self, rows, cols, values):
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        values = np.asarray(values, dtype=float).ravel()
        if not (rows.size == cols.size == values.size):
            raise ValueError("rows, cols and values must have equal length")
        if rows.size and (rows.min() < 0 or rows.max() >= self.shape[0]
                          or cols.min() < 0 or cols.max() >= self.shape[1]):
            raise IndexError("triplet index out of range")
        self._rows.append(rows)
        self._cols.append(cols)
        self._vals.append(values)

    def tocsr(self) -> sp.csr_matrix:
        if not self._rows:
            return sp.csr_matrix(self.shape)
        rows = np.concatenate(self._rows)
        cols = np.concatenate(self._cols)
        vals = np.concatenate(self._vals)
        mat = sp.coo_matrix((vals, (rows, cols)), shape=self.shape).tocsr()
        mat.sum_duplicates()
        return mat


def accumulate(system: SparseSystem, rows, cols, values):
    system.accumulate(rows, cols, values)


def solve(A, rhs, free=None, method="direct", rtol=1e-10, symmetric=None):
    """Solve ``A[free, free] x = rhs[free]``; returns ``x`` on the free DOFs.

    ``rhs`` may have several columns. ``method`` is ``'direct'`` (sparse LU)
    or ``'cg'`` (Jacobi-preconditioned conjugate gradients, symmetric only).
    The relative residual is checked against ``rtol``.
    """
    A = sp.csr_matrix(A)
    rhs = np.asarray(rhs, dtype=float)
    if free is not None:
        A = A[free][:, free]
        rhs = rhs[free]
    if A.shape[0] == 0:
        return np.zeros_like(rhs)
    if symmetric is None:
        symmetric = abs(A - A.T).max() <= 1e-12 * max(abs(A).max(), 1.0)
    if method == "direct":
        opts = "MMD_AT_PLUS_A" if symmetric else "COLAMD"
        try:
            lu = spla.splu(A.tocsc(), permc_spec=opts,
                           options={"SymmetricMode": bool(symmetric)})
        except RuntimeError as exc:
            raise SolverError(f"factorisation failed: {exc}") from None
        x = lu.solve(rhs)
    elif method == "cg":
        if not symmetric:
            raise SolverError("cg needs a symmetric matrix")
        d = A.diagonal()
        M = sp.diags(1.0 / d)
        cols = rhs if rhs.ndim == 2 else rhs[:, None]
        out = []
        for b in cols.T:
            x_k, info = spla.cg(A, b, rtol=rtol, atol=0.0, M=M, maxiter=10 * A.shape[0])
            if info != 0:
                raise SolverError(f"cg did not converge (info={info})")
            out.append(x_k)
        x = np.column_stack(out) if rhs.ndim == 2 else out[0]
    else:
        raise ValueError(f"unknown solver method '{method}'")
    residual = np.linalg.norm(A @ x - rhs)
    scale = np.linalg.norm(rhs)
    # cg tolerance is relative to |b|; direct solves allow a roundoff margin
    limit = rtol * scale if method == "cg" else max(rtol * scale, 1e-12 * scale * np.sqrt(A.shape[0]))
    if not np.isfinite(residual) or residual > max(limit, 1e-300) and scale > 0:
        raise SolverError(f"residual {residual:.3e} exceeds tolerance ({limit:.3e})")
    return x
