"""Adaptive loops: solve, estimate, mark, refine.

Three model problems are provided:

* :func:`afem_loop` for linear Poisson problems with Dirichlet and Neumann
  parts (the unit-square load problem and the L-shape corner singularity),
* :func:`goafem_loop` for goal-oriented refinement with discontinuous data,
* :func:`ailfem_loop` for a quasilinear problem solved by Zarantonello,
  Kačanov or Newton linearization with nested iteration.

Every loop returns a :class:`ConvergenceHistory` whose rows can be written
to CSV.
"""
from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable

import numpy as np

from .assembly import BilinearForm, LinearForm, assemble
from .elements import LagrangeH1, LowestOrderH1, LowestOrderL2
from .estimators import (estimate_data_divergence, estimate_laplace, estimate_poisson_p1,
                         estimate_quasilinear, mark_doerfler, mu, mu_prime)
from .functions import CompositeFunction, Constant, MeshFunction
from .integration import integrate_element
from .linalg import solve, vector_product
from .mesh import Mesh, load_geometry
from .prolongation import LoFeProlongation
from .quadrature import quadrature_of_order
from .space import FeFunction, FeSpace, Gradient, nodal_interpolation

CSV_COLUMNS = ("level", "nDofs", "estimator", "H1Error", "goalEstimate", "tAssembleA",
               "tAssembleF", "tSolve", "tEstimate", "tMark", "tRefine", "tTotal")

LINEARIZATIONS = ("zarantonello", "kacanov", "newton")


@dataclass
class LoopConfig:
    """Parameters shared by all adaptive loops.

    The loop runs while the current size is below ``max_dofs`` (or
    ``max_elements`` if that is set instead); the mesh that first exceeds the
    bound is not solved on.
    """

    theta: float = 0.5
    max_dofs: int | None = None
    max_elements: int | None = None
    order: int = 1
    strategy: str = "nvb"
    solver: str = "direct"
    method: str = "kacanov"
    delta: float = 0.5
    inner_tolerance: float = 0.1
    max_inner: int = 50
    max_levels: int = 1000
    energy_error: str = "quadrature"

    def __post_init__(self):
        if not 0 < self.theta <= 1:
            raise ValueError("theta must lie in (0, 1]")
        if self.delta <= 0:
            raise ValueError("delta must be positive")
        if self.order < 1:
            raise ValueError("order must be at least 1")
        if self.method not in LINEARIZATIONS:
            raise ValueError(f"method must be one of {LINEARIZATIONS}")
        if self.energy_error not in ("quadrature", "interpolant"):
            raise ValueError("energy_error must be 'quadrature' or 'interpolant'")
        if self.max_dofs is None and self.max_elements is None:
            raise ValueError("set max_dofs or max_elements")

    def keep_going(self, n_dofs, n_elements, level):
        if level >= self.max_levels:
            return False
        if self.max_elements is not None and n_elements >= self.max_elements:
            return False
        return self.max_dofs is None or n_dofs < self.max_dofs


@dataclass
class LevelRecord:
    level: int
    nDofs: int
    estimator: float
    H1Error: float = math.nan
    goalEstimate: float = math.nan
    tAssembleA: float = 0.0
    tAssembleF: float = 0.0
    tSolve: float = 0.0
    tEstimate: float = 0.0
    tMark: float = 0.0
    tRefine: float = 0.0
    tTotal: float = 0.0
    nElements: int = 0
    innerIterations: int = 0


class ConvergenceHistory:
    """Per-level records of an adaptive run."""

    def __init__(self):
        self.records: list[LevelRecord] = []

    def append(self, record: LevelRecord):
        if self.records and record.nDofs <= self.records[-1].nDofs:
            raise ValueError("nDofs must increase strictly from level to level")
        self.records.append(record)

    def __len__(self):
        return len(self.records)

    def __getitem__(self, k):
        return self.records[k]

    def column(self, name) -> np.ndarray:
        return np.array([getattr(r, name) for r in self.records], dtype=float)

    def slope(self, name="estimator", against="nDofs", decades=1.0):
        """Least-squares slope in log-log scale over the last ``decades`` of ``against``."""
        x = self.column(against)
        y = self.column(name)
        keep = (x >= x[-1] / 10 ** decades) & np.isfinite(y) & (y > 0)
        if keep.sum() < 2:
            raise ValueError("need at least two levels to fit a slope")
        return float(np.polyfit(np.log(x[keep]), np.log(y[keep]), 1)[0])

    def to_csv(self, path):
        path = Path(path)
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(CSV_COLUMNS)
            for r in self.records:
                row = []
                for name in CSV_COLUMNS:
                    value = getattr(r, name)
                    if isinstance(value, float) and math.isnan(value):
                        row.append("")
                    elif isinstance(value, float):
                        row.append(repr(value))
                    else:
                        row.append(value)
                writer.writerow(row)
        return path


class _Timer:
    """Accumulates wall-clock time of labelled phases."""

    def __init__(self):
        self.times = {}

    def __call__(self, label):
        timer = self

        class _Phase:
            def __enter__(self):
                self.start = time.perf_counter()

            def __exit__(self, *exc):
                timer.times[label] = timer.times.get(label, 0.0) + time.perf_counter() - self.start

        return _Phase()

    def get(self, label):
        return self.times.get(label, 0.0)


def _mesh(geometry) -> Mesh:
    return geometry if isinstance(geometry, Mesh) else load_geometry(geometry)


def _finish_level(history, level, timer, total, n_dofs, n_elements, estimator, **extra):
    phase_time = sum(timer.get(k) for k in ("A", "F", "solve", "estimate", "mark", "refine"))
    total += phase_time
    history.append(LevelRecord(level=level, nDofs=n_dofs, estimator=estimator,
                               tAssembleA=timer.get("A"), tAssembleF=timer.get("F"),
                               tSolve=timer.get("solve"), tEstimate=timer.get("estimate"),
                               tMark=timer.get("mark"), tRefine=timer.get("refine"),
                               tTotal=total, nElements=n_elements, **extra))
    return total


# ---------------------------------------------------------------------------
# linear problems


@dataclass
class PoissonProblem:
    """``-Laplace u = f`` with homogeneous Dirichlet and inhomogeneous Neumann data.

    Callables receive points ``x`` of shape ``(2, n, nq)``. Boundary parts are
    0-based; ``dirichlet=None`` means every part not listed in ``neumann_parts``.
    """

    geometry: str | Path | Mesh = "unitsquare"
    load: Callable | float | None = 1.0
    neumann: Callable | None = None
    neumann_parts: tuple = ()
    dirichlet: tuple | None = None
    exact: Callable | None = None
    exact_gradient: Callable | None = None


def lshape_exact_solution(x):
    """``r^{2/3} sin(2 phi / 3)`` with the angle taken in ``[0, 2 pi)``."""
    phi = np.arctan2(x[1], x[0])
    phi = phi + 2 * np.pi * (phi < 0)
    r = np.hypot(x[0], x[1])
    return r ** (2 / 3) * np.sin(2 / 3 * phi)


def lshape_exact_gradient(x):
    """Gradient ``(2/3) r^{-1/3} (sin(-phi/3), cos(-phi/3))`` of :func:`lshape_exact_solution`."""
    phi = np.arctan2(x[1], x[0])
    phi = phi + 2 * np.pi * (phi < 0)
    r = np.hypot(x[0], x[1])
    with np.errstate(divide="ignore"):
        scale = 2 / 3 * r ** (-1 / 3)
    return np.stack([scale * np.sin(-phi / 3), scale * np.cos(-phi / 3)])


def lshape_neumann_data(x):
    """Outward normal derivative of :func:`lshape_exact_solution` on the outer L-shape boundary."""
    x1, x2 = x[0], x[1]
    right = (x1 > 0) & (np.abs(x1) > np.abs(x2))
    left = (x1 < 0) & (np.abs(x1) > np.abs(x2))
    top = (x2 > 0) & (np.abs(x1) < np.abs(x2))
    bottom = (x2 < 0) & (np.abs(x1) < np.abs(x2))
    phi = np.arctan2(x2, x1)
    r = np.hypot(x1, x2)
    with np.errstate(divide="ignore", invalid="ignore"):
        c_r = 2 / 3 * r ** (-4 / 3)
    c_phi = 2 / 3 * (phi + 2 * np.pi * (phi < 0))
    dudx = c_r * (x1 * np.sin(c_phi) - x2 * np.cos(c_phi))
    dudy = c_r * (x2 * np.sin(c_phi) + x1 * np.cos(c_phi))
    y = np.zeros_like(x1)
    y[right] = dudx[right]
    y[left] = -dudx[left]
    y[top] = dudy[top]
    y[bottom] = -dudy[bottom]
    return y


def unit_square_problem(geometry="unitsquare") -> PoissonProblem:
    """``-Laplace u = 1`` on the unit square with ``u = 0`` on the boundary."""
    return PoissonProblem(geometry=geometry, load=1.0)


def lshape_problem(geometry="Lshape") -> PoissonProblem:
    """Harmonic corner singularity: Dirichlet on part 0 (re-entrant corner), Neumann on part 1."""
    return PoissonProblem(geometry=geometry, load=None, neumann=lshape_neumann_data,
                          neumann_parts=(1,), dirichlet=(0,), exact=lshape_exact_solution,
                          exact_gradient=lshape_exact_gradient)


def _as_function(mesh, value):
    if value is None:
        return None
    if callable(value):
        return MeshFunction(mesh, value)
    return Constant(mesh, float(value))


def _energy_error(problem, config, mesh, u):
    """Callable ``A -> ||grad(u - u_h)||`` or None if no exact solution is known.

    ``'quadrature'`` integrates ``|grad u - grad u_h|^2`` with a rule of order
    ``2p + 2``; ``'interpolant'`` returns ``sqrt(d^T A d)`` with ``d`` the
    difference to the nodal interpolant of the exact solution.
    """
    p = config.order
    if config.energy_error == "quadrature" and problem.exact_gradient is not None:
        diff = CompositeFunction(lambda g, gh: (g[0] - gh[0]) ** 2 + (g[1] - gh[1]) ** 2,
                                 MeshFunction(mesh, problem.exact_gradient, shape=2), Gradient(u))
        qr = quadrature_of_order(2 * p + 2, "2D")
        return lambda A: float(np.sqrt(integrate_element(diff, qr).sum()))
    if problem.exact is not None:
        exact = MeshFunction(mesh, problem.exact)

        def interpolant_error(A):
            delta = u.data - nodal_interpolation(exact, u.space)
            return float(np.sqrt(max(delta @ (A @ delta), 0.0)))
        return interpolant_error
    return None


def afem_loop(problem: PoissonProblem, config: LoopConfig, mesh: Mesh | None = None,
              callback=None) -> ConvergenceHistory:
    """Adaptive loop for :class:`PoissonProblem`.

    ``callback(level, mesh, u)`` is called after each solve (outside the timers).
    """
    mesh = _mesh(problem.geometry) if mesh is None else mesh
    p = config.order
    neumann_parts = tuple(problem.neumann_parts)
    dirichlet = problem.dirichlet
    if dirichlet is None:
        dirichlet = tuple(k for k in range(len(mesh.boundaries)) if k not in neumann_parts)
    space = FeSpace(mesh, LagrangeH1(p), dirichlet=dirichlet)
    u = FeFunction(space)
    f = _as_function(mesh, problem.load)
    phi = _as_function(mesh, problem.neumann)

    blf = BilinearForm(space)
    blf.a = Constant(mesh, 1.0)
    lf = LinearForm(space)
    lf.f = f
    if phi is not None:
        lf.neumann = phi
        lf.bnd_neumann = list(neumann_parts)
    use_p1_estimator = p == 1 and phi is None and f is not None
    error = _energy_error(problem, config, mesh, u)

    history = ConvergenceHistory()
    total = 0.0
    level = 0
    while config.keep_going(space.n_dofs, mesh.n_elements, level):
        timer = _Timer()
        with timer("A"):
            A = assemble(blf)
        with timer("F"):
            F = assemble(lf) if (f is not None or phi is not None) else np.zeros(space.n_dofs)
        with timer("solve"):
            free = space.free_dofs
            u.set_data(0.0)
            u.set_free_data(solve(A, F, free, method=config.solver))
        with timer("estimate"):
            if use_p1_estimator:
                eta2 = estimate_poisson_p1(u, f)
            else:
                eta2 = estimate_laplace(u, f=f, neumann=phi, dirichlet_parts=dirichlet,
                                        neumann_parts=neumann_parts)
        h1_error = error(A) if error is not None else math.nan
        if callback is not None:
            callback(level, mesh, u)
        n_dofs, n_elements = space.n_dofs, mesh.n_elements
        with timer("mark"):
            marked = mark_doerfler(eta2, config.theta)
        with timer("refine"):
            mesh.refine_locally(marked, config.strategy)
        total = _finish_level(history, level, timer, total, n_dofs, n_elements,
                              float(np.sqrt(eta2.sum())), H1Error=h1_error)
        level += 1
    return history


# ---------------------------------------------------------------------------
# goal-oriented AFEM


def _indicator_data(mesh, space_l2, predicate):
    w = FeFunction(space_l2)
    w.set_data(nodal_interpolation(MeshFunction(mesh, lambda x: predicate(x).astype(float)), space_l2))
    return w


def goafem_loop(config: LoopConfig, geometry="unitsquare", primal_data=None, dual_data=None,
                callback=None) -> ConvergenceHistory:
    """Goal-oriented loop for ``-Laplace u = -div f`` and ``-Laplace z = -div g``.

    ``f`` and ``g`` are ``c * chi_S`` times a fixed direction, with ``chi_S``
    carried as piecewise constant data and prolongated after each refinement.
    ``primal_data`` / ``dual_data`` are ``(predicate, direction)`` pairs; by
    default ``f = (1, 0)`` on ``x1 + x2 < 1/2`` and ``g = (-1, 0)`` on
    ``x1 + x2 > 3/2``. The initial mesh is refined once uniformly by RGB so
    that both lines are resolved. Marking uses the combined indicator
    ``eta_T^2 * zeta^2 + zeta_T^2 * eta^2``.
    """
    mesh = _mesh(geometry)
    mesh.refine_uniform(1, "rgb")
    if primal_data is None:
        primal_data = (lambda x: x[0] + x[1] < 0.5, (1.0, 0.0))
    if dual_data is None:
        dual_data = (lambda x: x[0] + x[1] > 1.5, (-1.0, 0.0))
    space = FeSpace(mesh, LagrangeH1(config.order))
    data_space = FeSpace(mesh, LowestOrderL2())
    w_f = _indicator_data(mesh, data_space, primal_data[0])
    w_g = _indicator_data(mesh, data_space, dual_data[0])
    dir_f = np.asarray(primal_data[1], dtype=float)[:, None, None]
    dir_g = np.asarray(dual_data[1], dtype=float)[:, None, None]
    fvec = CompositeFunction(lambda w: w * dir_f, w_f, shape=2)
    gvec = CompositeFunction(lambda w: w * dir_g, w_g, shape=2)
    transfer = LoFeProlongation(data_space)

    blf = BilinearForm(space)
    blf.a = Constant(mesh, 1.0)
    lf_f = LinearForm(space)
    lf_f.fvec = fvec
    lf_g = LinearForm(space)
    lf_g.fvec = gvec
    u, z = FeFunction(space), FeFunction(space)

    history = ConvergenceHistory()
    total = 0.0
    level = 0
    while config.keep_going(space.n_dofs, mesh.n_elements, level):
        timer = _Timer()
        with timer("A"):
            A = assemble(blf)
        with timer("F"):
            rhs = np.column_stack([assemble(lf_f), assemble(lf_g)])
        with timer("solve"):
            uz = solve(A, rhs, space.free_dofs, method=config.solver)
            u.set_data(0.0)
            z.set_data(0.0)
            u.set_free_data(uz[:, 0])
            z.set_free_data(uz[:, 1])
        with timer("estimate"):
            eta2 = estimate_data_divergence(u, fvec)
            zeta2 = estimate_data_divergence(z, gvec)
        if callback is not None:
            callback(level, mesh, u, z)
        n_dofs, n_elements = space.n_dofs, mesh.n_elements
        eta_sum, zeta_sum = eta2.sum(), zeta2.sum()
        with timer("mark"):
            marked = mark_doerfler(eta2 * zeta_sum + zeta2 * eta_sum, config.theta)
        with timer("refine"):
            if mesh.refine_locally(marked, config.strategy) is not None:
                w_f.set_data(transfer.prolongate(w_f))
                w_g.set_data(transfer.prolongate(w_g))
        total = _finish_level(history, level, timer, total, n_dofs, n_elements,
                              float(np.sqrt(eta_sum)),
                              goalEstimate=float(np.sqrt(eta_sum * zeta_sum)))
        level += 1
    return history


# ---------------------------------------------------------------------------
# iterative linearization


def _squared_norm(p):
    return vector_product(p, p)


def ailfem_step(u: FeFunction, method: str, delta: float = 0.5, laplace=None,
                solver="direct", timer=None):
    """One linearization step for ``-div(mu(|grad u|^2) grad u) = 1``; updates ``u``.

    Returns the energy norm ``sqrt(d^T L d)`` of the change ``d`` of the
    coefficients, with ``L`` the stiffness matrix of the Laplacian
    (assembled here if ``laplace`` is None).
    """
    if method not in LINEARIZATIONS:
        raise ValueError(f"method must be one of {LINEARIZATIONS}")
    timer = _Timer() if timer is None else timer
    space = u.space
    mesh = u.mesh
    grad = Gradient(u)
    blf = BilinearForm(space)
    lf = LinearForm(space)
    lf.f = Constant(mesh, 1.0)
    flux = CompositeFunction(lambda p: -mu(_squared_norm(p)) * p, grad, shape=2)
    if method == "zarantonello":
        blf.a = Constant(mesh, 1.0)
        lf.fvec = flux
    elif method == "kacanov":
        blf.a = CompositeFunction(lambda p: mu(_squared_norm(p)), grad, shape=1)
    else:
        identity = np.array([1.0, 0.0, 0.0, 1.0])[:, None, None]
        blf.a = CompositeFunction(
            lambda p: mu(_squared_norm(p)) * identity
            + 2 * mu_prime(_squared_norm(p)) * vector_product(p, p, (2, 1), ((2, 1), True)),
            grad, shape=(2, 2))
        lf.fvec = flux
    with timer("A"):
        A = assemble(blf)
    with timer("F"):
        F = assemble(lf)
    free = space.free_dofs
    with timer("solve"):
        x = solve(A, F, free, method=solver)
    old = u.data.copy()
    new = old.copy()
    if method == "zarantonello":
        new[free] += delta * x
    elif method == "kacanov":
        new[free] = x
    else:
        new[free] += x
    u.set_data(new)
    if laplace is None:
        stiffness = BilinearForm(space)
        stiffness.a = Constant(mesh, 1.0)
        laplace = assemble(stiffness)
    d = new - old
    return float(np.sqrt(max(d @ (laplace @ d), 0.0)))


def ailfem_loop(config: LoopConfig, geometry="Lshape", callback=None) -> ConvergenceHistory:
    """Adaptive iterative linearization with nested iteration (P1, all-Dirichlet).

    On each level, linearization steps are taken until the energy norm of the
    update drops below ``config.inner_tolerance`` times the estimator of the
    new iterate (at most ``config.max_inner`` steps). The final iterate is
    prolongated to the refined mesh as initial guess.
    """
    if config.order != 1:
        raise ValueError("the iterative linearization loop is implemented for p = 1")
    mesh = _mesh(geometry)
    space = FeSpace(mesh, LowestOrderH1())
    u = FeFunction(space)
    transfer = LoFeProlongation(space)
    history = ConvergenceHistory()
    total = 0.0
    level = 0
    while config.keep_going(space.n_dofs, mesh.n_elements, level):
        timer = _Timer()
        with timer("A"):
            stiffness = BilinearForm(space)
            stiffness.a = Constant(mesh, 1.0)
            laplace = assemble(stiffness)
        steps = 0
        while True:
            update = ailfem_step(u, config.method, config.delta, laplace=laplace,
                                 solver=config.solver, timer=timer)
            steps += 1
            with timer("estimate"):
                eta2 = estimate_quasilinear(u)
            eta = float(np.sqrt(eta2.sum()))
            if update <= config.inner_tolerance * eta:
                break
            if steps >= config.max_inner:
                raise RuntimeError(f"linearization did not converge in {steps} steps "
                                   f"(update {update:.3e}, estimator {eta:.3e})")
        if callback is not None:
            callback(level, mesh, u)
        n_dofs, n_elements = space.n_dofs, mesh.n_elements
        with timer("mark"):
            marked = mark_doerfler(eta2, config.theta)
        with timer("refine"):
            if mesh.refine_locally(marked, config.strategy) is not None:
                u.set_data(transfer.prolongate(u))
        total = _finish_level(history, level, timer, total, n_dofs, n_elements, eta,
                              innerIterations=steps)
        level += 1
    return history
