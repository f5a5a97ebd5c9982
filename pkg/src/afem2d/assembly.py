"""Assembly of bilinear and linear forms.

The bilinear form is

    a(u, v) = int A grad u . grad v + (b . grad u) v + c u v dx + int_{Gamma_R} alpha u v ds

and the linear form

    F(v) = int f v + fvec . grad v dx + int_{Gamma_N} phi v ds + int_{Gamma_R} gamma v ds.

Every slot holds a reference to an :class:`~afem2d.functions.Evaluable`, so
coefficients that depend on a finite element function are re-evaluated on
every call of :func:`assemble`.
"""
from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from .functions import Evaluable
from .quadrature import QuadratureRule, quadrature_of_order
from .space import FeSpace, element_basis_on_edges


class AssemblyError(ValueError):
    pass


def _physical_gradients(space: FeSpace, qr: QuadratureRule):
    """Basis gradients ``(nT, nloc, 2, nq)`` on every element."""
    ref = space.element.evaluate(qr.bary, "gradient")  # (nloc, 2, nq)
    B = space.mesh.affine_transformation().DFinvT  # (nT, 2, 2)
    return np.einsum("tab,lbq->tlaq", B, ref, optimize=True)


def _check_slot(name, value, n_components, space):
    if value is None:
        return None
    if not isinstance(value, Evaluable):
        raise AssemblyError(f"slot '{name}' must hold an Evaluable, got {type(value).__name__}")
    if value.mesh is not space.mesh:
        raise AssemblyError(f"slot '{name}' lives on a different mesh")
    if value.n_components not in n_components:
        raise AssemblyError(f"slot '{name}' has {value.n_components} components, "
                            f"expected {' or '.join(map(str, n_components))}")
    return value


def _parts(parts, name):
    if parts is None:
        raise AssemblyError(f"boundary term '{name}' is set but no boundary parts are selected")
    if isinstance(parts, (int, np.integer)):
        return [int(parts)]
    return [int(k) for k in parts]


def _rule(qr, order, dim):
    if qr is None:
        return quadrature_of_order(order, dim)
    if not isinstance(qr, QuadratureRule):
        raise AssemblyError("quadrature rule expected")
    if qr.dim != (1 if dim == "1D" else 2):
        raise AssemblyError(f"expected a {dim} quadrature rule")
    return qr


class BilinearForm:
    """Coefficient slots ``a`` (1 or 4 components), ``b`` (2), ``c`` (1), ``robin`` (1).

    ``qra``, ``qrb``, ``qrc``, ``qr_robin`` override the default quadrature
    orders; ``bnd_robin`` selects the Robin boundary parts (0-based).
    A scalar ``a`` means ``a * I``.
    """

    def __init__(self, space: FeSpace):
        self.space = space
        self.a = self.b = self.c = self.robin = None
        self.qra = self.qrb = self.qrc = self.qr_robin = None
        self.bnd_robin = None

    def assemble(self) -> sp.csr_matrix:
        return assemble_bilinear(self)


class LinearForm:
    """Slots ``f`` (1 component), ``fvec`` (2), ``neumann`` (1), ``robin`` (1).

    Rules ``qrf``, ``qrfvec``, ``qr_neumann``, ``qr_robin``; boundary parts
    ``bnd_neumann`` and ``bnd_robin`` (0-based).
    """

    def __init__(self, space: FeSpace):
        self.space = space
        self.f = self.fvec = self.neumann = self.robin = None
        self.qrf = self.qrfvec = self.qr_neumann = self.qr_robin = None
        self.bnd_neumann = self.bnd_robin = None

    def assemble(self) -> np.ndarray:
        return assemble_linear(self)


def assemble_bilinear(blf: BilinearForm) -> sp.csr_matrix:
    space = blf.space
    mesh = space.mesh
    p = space.element.order
    a = _check_slot("a", blf.a, (1, 4), space)
    b = _check_slot("b", blf.b, (2,), space)
    c = _check_slot("c", blf.c, (1,), space)
    robin = _check_slot("robin", blf.robin, (1,), space)
    if a is None and b is None and c is None and robin is None:
        raise AssemblyError("bilinear form has no coefficients set")

    e2d = space.element2dofs
    nT, nloc = e2d.shape
    area = mesh.affine_transformation().area
    K = np.zeros((nT, nloc, nloc))
    if a is not None:
        qr = _rule(blf.qra, max(2 * p - 2, 1), "2D")
        grad = _physical_gradients(space, qr)
        coeff = a.eval(qr.bary) * qr.weights  # (1|4, nT, nq)
        if coeff.shape[0] == 1:
            K += np.einsum("tiaq,tjaq,tq->tij", grad, grad, coeff[0], optimize=True)
        else:
            A = coeff.reshape(2, 2, nT, -1, order="F")  # [row, col, t, q]
            K += np.einsum("tiaq,abtq,tjbq->tij", grad, A, grad, optimize=True)
    if b is not None:
        qr = _rule(blf.qrb, 2 * p, "2D")
        grad = _physical_gradients(space, qr)
        phi = space.element.evaluate(qr.bary, "value")[:, 0, :]
        coeff = b.eval(qr.bary) * qr.weights  # (2, nT, nq)
        K += np.einsum("atq,tjaq,iq->tij", coeff, grad, phi, optimize=True)
    if c is not None:
        qr = _rule(blf.qrc, 2 * p, "2D")
        phi = space.element.evaluate(qr.bary, "value")[:, 0, :]
        coeff = c.eval(qr.bary)[0] * qr.weights
        K += np.einsum("tq,iq,jq->tij", coeff, phi, phi, optimize=True)
    K *= area[:, None, None]
    rows = [np.broadcast_to(e2d[:, :, None], K.shape).ravel()]
    cols = [np.broadcast_to(e2d[:, None, :], K.shape).ravel()]
    vals = [K.ravel()]

    if robin is not None:
        qr = _rule(blf.qr_robin, 2 * p, "1D")
        edges = mesh.boundary_edge_indices(_parts(blf.bnd_robin, "robin"))
        edges, elem, phi = element_basis_on_edges(space, qr, edges)
        length = mesh.affine_transformation().edge_length[edges]
        coeff = robin.eval_edge(qr.bary, edges)[0] * qr.weights * length[:, None]
        Ke = np.einsum("eq,eiq,ejq->eij", coeff, phi, phi, optimize=True)
        d = e2d[elem]
        rows.append(np.broadcast_to(d[:, :, None], Ke.shape).ravel())
        cols.append(np.broadcast_to(d[:, None, :], Ke.shape).ravel())
        vals.append(Ke.ravel())

    n = space.n_dofs
    mat = sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                        shape=(n, n)).tocsr()
    mat.sum_duplicates()
    return mat


def assemble_linear(lf: LinearForm) -> np.ndarray:
    space = lf.space
    mesh = space.mesh
    p = space.element.order
    f = _check_slot("f", lf.f, (1,), space)
    fvec = _check_slot("fvec", lf.fvec, (2,), space)
    neumann = _check_slot("neumann", lf.neumann, (1,), space)
    robin = _check_slot("robin", lf.robin, (1,), space)
    if f is None and fvec is None and neumann is None and robin is None:
        raise AssemblyError("linear form has no coefficients set")

    e2d = space.element2dofs
    nT, nloc = e2d.shape
    area = mesh.affine_transformation().area
    local = np.zeros((nT, nloc))
    if f is not None:
        qr = _rule(lf.qrf, 2 * p, "2D")
        phi = space.element.evaluate(qr.bary, "value")[:, 0, :]
        local += (f.eval(qr.bary)[0] * qr.weights) @ phi.T
    if fvec is not None:
        qr = _rule(lf.qrfvec, max(2 * p - 1, 1), "2D")
        grad = _physical_gradients(space, qr)
        coeff = fvec.eval(qr.bary) * qr.weights
        local += np.einsum("atq,tiaq->ti", coeff, grad, optimize=True)
    local *= area[:, None]
    F = np.bincount(e2d.ravel(), weights=local.ravel(), minlength=space.n_dofs)

    for name, slot, qr_in, parts in (("neumann", neumann, lf.qr_neumann, lf.bnd_neumann),
                                     ("robin", robin, lf.qr_robin, lf.bnd_robin)):
        if slot is None:
            continue
        qr = _rule(qr_in, 2 * p, "1D")
        edges = mesh.boundary_edge_indices(_parts(parts, name))
        edges, elem, phi = element_basis_on_edges(space, qr, edges)
        length = mesh.affine_transformation().edge_length[edges]
        coeff = slot.eval_edge(qr.bary, edges)[0] * qr.weights * length[:, None]
        Fe = np.einsum("eq,eiq->ei", coeff, phi)
        F += np.bincount(e2d[elem].ravel(), weights=Fe.ravel(), minlength=space.n_dofs)
    return F


def assemble(form):
    """Matrix of a :class:`BilinearForm` or vector of a :class:`LinearForm`."""
    if isinstance(form, BilinearForm):
        return assemble_bilinear(form)
    if isinstance(form, LinearForm):
        return assemble_linear(form)
    raise TypeError(f"cannot assemble {type(form).__name__}")
