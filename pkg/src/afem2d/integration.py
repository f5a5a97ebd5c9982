"""Quadrature over elements and edges, including jumps across edges."""
from __future__ import annotations

import numpy as np

from .functions import Evaluable, _as_index, as_bary
from .quadrature import QuadratureRule


def _squeeze(values):
    return values[0] if values.shape[0] == 1 else values


def integrate_element(f: Evaluable, qr: QuadratureRule, idx=None):
    """``|T| sum_k w_k f(x_k)`` per element; shape ``(n,)`` for scalar ``f``."""
    if qr.dim != 2:
        raise ValueError("element integration needs a 2D quadrature rule")
    idx = _as_index(idx, f.mesh.n_elements)
    area = f.mesh.affine_transformation().area[idx]
    values = f.eval(qr.bary, idx)
    return _squeeze((values @ qr.weights) * area)


def integrate_edge(f: Evaluable, qr: QuadratureRule, idx=None):
    """``|E| sum_k w_k f(x_k)`` per edge; requires an edge trace."""
    if qr.dim != 1:
        raise ValueError("edge integration needs a 1D quadrature rule")
    idx = _as_index(idx, f.mesh.n_edges)
    length = f.mesh.affine_transformation().edge_length[idx]
    values = f.eval_edge(qr.bary, idx)
    return _squeeze((values @ qr.weights) * length)


def edge_to_element_bary(coords, local_edge, reverse):
    """Element barycentrics of edge points on local edge ``local_edge``.

    Edge point ``l0 * start + l1 * end``; ``reverse`` means the element
    traverses the edge from end to start.
    """
    out = np.zeros((coords.shape[0], 3))
    j, k = local_edge, (local_edge + 1) % 3
    if reverse:
        j, k = k, j
    out[:, j] = coords[:, 0]
    out[:, k] = coords[:, 1]
    return out


def eval_edge_from_side(f: Evaluable, bary, edges, side):
    """Evaluate the element-wise function ``f`` on ``edges`` from one side.

    ``side`` 0 is the element with the edge's stored orientation (normal points
    out of it), ``side`` 1 the other; missing neighbours give zeros.
    Returns ``(components, n_edges, n_nodes)`` and the mask of present neighbours.
    """
    mesh = f.mesh
    coords = as_bary(bary, 1)
    elem = mesh.edge2elements[edges, side]
    local = mesh.edge2local[edges, side]
    present = elem >= 0
    out = None
    for j in range(3):
        sel = np.flatnonzero(present & (local == j))
        if sel.size == 0:
            continue
        el_bary = edge_to_element_bary(coords, j, reverse=(side == 1))
        vals = f.eval(el_bary, elem[sel])
        if out is None:
            out = np.zeros((vals.shape[0], len(edges), coords.shape[0]))
        out[:, sel, :] = vals
    if out is None:
        out = np.zeros((f.n_components, len(edges), coords.shape[0]))
    return out, present


def _post_process(jump, f, bary, post):
    if len(post) % 3:
        raise ValueError("post-processing arguments come in (func, aux_list, idx) triples")
    n_edges = f.mesh.n_edges
    for k in range(0, len(post), 3):
        func, aux, idx = post[k:k + 3]
        sel = _as_index(idx, n_edges)
        aux_vals = [a.eval_edge(bary, sel) for a in aux]
        new = np.asarray(func(jump[:, sel, :], *aux_vals), dtype=float)
        if new.ndim == 2:
            new = new[None]
        if new.shape[1:] != (sel.size, jump.shape[2]):
            raise ValueError(f"post-processing returned shape {new.shape}")
        if new.shape[0] != jump.shape[0]:
            if sel.size != n_edges:
                raise ValueError("post-processing on an edge subset must keep the component count")
            jump = new
        else:
            jump[:, sel, :] = new
    return jump


def _jump(f, qr, normal):
    mesh = f.mesh
    edges = np.arange(mesh.n_edges)
    plus, _ = eval_edge_from_side(f, qr.bary, edges, 0)
    minus, _ = eval_edge_from_side(f, qr.bary, edges, 1)
    jump = plus - minus
    if normal:
        n = mesh.affine_transformation().unit_normal
        if jump.shape[0] != 2:
            raise ValueError("normal jump needs a 2-vector valued function")
        jump = (jump[0] * n[:, 0, None] + jump[1] * n[:, 1, None])[None]
    return jump


def _integrate(f, qr, jump, post):
    if qr.dim != 1:
        raise ValueError("jump integration needs a 1D quadrature rule")
    jump = _post_process(jump, f, qr.bary, post)
    length = f.mesh.affine_transformation().edge_length
    return _squeeze((jump @ qr.weights) * length)


def integrate_jump(f: Evaluable, qr: QuadratureRule, *post):
    """Integrate ``[[f]] = f|T+ - f|T-`` over every edge (single-sided on the boundary).

    ``post`` holds ``(func, aux_list, idx)`` triples, applied in order: on the
    edges ``idx`` (``':'`` for all), the running jump ``j`` is replaced by
    ``func(j, *[a.eval_edge(...) for a in aux_list])``.
    """
    return _integrate(f, qr, _jump(f, qr, normal=False), post)


def integrate_normal_jump(f: Evaluable, qr: QuadratureRule, *post):
    """As :func:`integrate_jump` for ``[[f . n_E]]``."""
    return _integrate(f, qr, _jump(f, qr, normal=True), post)
