"""Residual error indicators and Dörfler marking.

All estimators return the squared indicators ``eta2`` per element. Edge
contributions are added to both adjacent elements.
"""
from __future__ import annotations

import numpy as np

from .functions import CompositeFunction, Evaluable
from .integration import integrate_element, integrate_normal_jump
from .quadrature import quadrature_of_order
from .space import FeFunction, Gradient, Hessian


def mu(t):
    """Nonlinearity ``1 + exp(-t)`` of the quasilinear model problem."""
    return 1.0 + np.exp(-t)


def mu_prime(t):
    return -np.exp(-t)


def _zero(j):
    return np.zeros_like(j)


def _square(j):
    return j ** 2


def _boundary_parts(mesh, parts):
    if parts is None:
        parts = range(len(mesh.boundaries))
    return np.asarray(mesh.boundary_edge_indices(list(parts)), dtype=np.int64)


def combine(mesh, volume, edge):
    """``h_T^2 * volume + h_T * sum of edge terms over the element's edges``."""
    h = np.sqrt(mesh.affine_transformation().area)
    return h ** 2 * volume + h * edge[mesh.element2edges].sum(axis=1)


def estimate_poisson_p1(u: FeFunction, f: Evaluable, qr_order=None):
    """``h_T^2 ||f||^2_T + h_T ||[grad u . n]||^2_{dT \\ boundary}`` for P1 ``u``.

    ``h_T = |T|^{1/2}``.
    """
    mesh = u.mesh
    qr_tri = quadrature_of_order(2 if qr_order is None else qr_order, "2D")
    volume = integrate_element(CompositeFunction(_square, f), qr_tri)
    edge = integrate_normal_jump(Gradient(u), quadrature_of_order(1, "1D"), _square, [], ":")
    edge[mesh.is_boundary_edge()] = 0.0
    return combine(mesh, volume, edge)


def estimate_laplace(u: FeFunction, f: Evaluable | None = None, neumann: Evaluable | None = None,
                     dirichlet_parts=None, neumann_parts=(), qr_edge_order=None):
    """Indicators for ``-Laplace u = f`` with Dirichlet and Neumann boundary parts.

    ``h_T^2 ||f + Laplace u_H||^2_T + h_T (||[grad u_H . n]||^2`` on interior
    edges ``+ ||grad u_H . n - phi||^2`` on Neumann edges``)``. Edges on
    ``dirichlet_parts`` (default: all parts not listed as Neumann) do not
    contribute. The default edge rule has order ``2p``.
    """
    mesh = u.mesh
    p = u.space.element.order
    neumann_parts = [int(k) for k in np.atleast_1d(neumann_parts)] if neumann_parts is not None else []
    if dirichlet_parts is None:
        dirichlet_parts = [k for k in range(len(mesh.boundaries)) if k not in neumann_parts]
    if neumann_parts and neumann is None:
        raise ValueError("Neumann parts given without Neumann data")
    H = Hessian(u)
    if f is None:
        residual = CompositeFunction(lambda D2u: (D2u[0] + D2u[3]) ** 2, H)
        order = max(2 * (p - 2), 1)
    else:
        residual = CompositeFunction(lambda fx, D2u: (fx[0] + D2u[0] + D2u[3]) ** 2, f, H)
        order = max(2 * p, 2)
    volume = integrate_element(residual, quadrature_of_order(order, "2D"))
    qr = quadrature_of_order(2 * p if qr_edge_order is None else qr_edge_order, "1D")
    post = [_zero, [], _boundary_parts(mesh, dirichlet_parts)]
    if neumann_parts:
        post += [lambda j, phi: j - phi, [neumann], _boundary_parts(mesh, neumann_parts)]
    post += [_square, [], ":"]
    edge = integrate_normal_jump(Gradient(u), qr, *post)
    return combine(mesh, volume, edge)


def estimate_data_divergence(u: FeFunction, fvec: Evaluable):
    """Indicators for ``-Laplace u = -div fvec`` with homogeneous Dirichlet data.

    ``h_T^2 ||Laplace u_H||^2_T + h_T ||[(grad u_H - fvec) . n]||^2`` on
    interior edges. ``fvec`` must be element-wise polynomial of degree < p
    (its divergence on elements is neglected).
    """
    mesh = u.mesh
    p = u.space.element.order
    volume = integrate_element(CompositeFunction(lambda H: (H[0] + H[3]) ** 2, Hessian(u)),
                               quadrature_of_order(max(2 * (p - 2), 1), "2D"))
    flux = CompositeFunction(lambda g, w: g - w, Gradient(u), fvec)
    edge = integrate_normal_jump(flux, quadrature_of_order(2 * p, "1D"), _square, [], ":")
    edge[mesh.is_boundary_edge()] = 0.0
    return combine(mesh, volume, edge)


def nonlinear_flux(u: FeFunction):
    """``mu(|grad u|^2) grad u``."""
    return CompositeFunction(lambda g: mu(g[0] ** 2 + g[1] ** 2) * g, Gradient(u))


def estimate_quasilinear(u: FeFunction):
    """Indicators for ``-div(mu(|grad u|^2) grad u) = 1`` with P1 ``u``.

    ``h_T^2 ||1||^2_T + h_T ||[mu(|grad u|^2) grad u . n]||^2`` on interior edges.
    """
    mesh = u.mesh
    volume = mesh.affine_transformation().area.copy()
    edge = integrate_normal_jump(nonlinear_flux(u), quadrature_of_order(1, "1D"), _square, [], ":")
    edge[mesh.is_boundary_edge()] = 0.0
    return combine(mesh, volume, edge)


def mark_doerfler(eta2, theta):
    """Minimal set ``M`` with ``theta * sum(eta2) <= sum(eta2[M])``.

    Indicators are sorted descending, ties broken by element index; the
    shortest prefix satisfying the bound is returned (sorted by index).
    All-zero indicators give the empty set.
    """
    eta2 = np.asarray(eta2, dtype=float)
    if not 0 < theta <= 1:
        raise ValueError("theta must lie in (0, 1]")
    if eta2.ndim != 1:
        raise ValueError("indicators must be a 1D array")
    if np.any(eta2 < 0) or not np.all(np.isfinite(eta2)):
        raise ValueError("indicators must be finite and nonnegative")
    order = np.argsort(-eta2, kind="stable")
    cumulative = np.cumsum(eta2[order])
    total = cumulative[-1] if eta2.size else 0.0
    if total == 0:
        return np.empty(0, dtype=np.int64)
    n = int(np.searchsorted(cumulative, theta * total, side="left")) + 1
    return np.sort(order[:n])


__all__ = ["mu", "mu_prime", "combine", "estimate_poisson_p1", "estimate_laplace",
           "estimate_data_divergence", "nonlinear_flux", "estimate_quasilinear",
           "mark_doerfler"]
