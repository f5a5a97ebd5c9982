"""End-to-end acceptance checks.

Each test prints one ``criterion N: PASS|FAIL`` line (visible in ``pytest -v``
output) and then asserts. Long adaptive runs are shared between criteria via
module-scoped fixtures.

Run alone with ``pytest tests/test_acceptance.py -v``.
"""
import time
from itertools import combinations
from math import factorial

import numpy as np
import pytest

from afem2d import (BilinearForm, Constant, FeFunction, FeSpace, LagrangeH1, LinearForm,
                    MeshFunction, Prolongation, assemble, load_geometry, mesh_from_arrays,
                    nodal_interpolation, quadrature_of_order, solve, vector_product)
from afem2d.afem import (LoopConfig, afem_loop, ailfem_loop, goafem_loop, lshape_problem,
                         unit_square_problem)
from afem2d.estimators import mark_doerfler
from conftest import (assert_conforming, euler_characteristic, patch_solution,
                      square_with_left_dirichlet)


def report(capsys, number, ok, detail):
    with capsys.disabled():
        print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'}  {detail}")
    assert ok, f"criterion {number}: {detail}"


def timed(func, *args, **kwargs):
    start = time.perf_counter()
    result = func(*args, **kwargs)
    return result, time.perf_counter() - start


@pytest.fixture(scope="module")
def poisson_run():
    return timed(afem_loop, unit_square_problem(), LoopConfig(theta=0.5, max_elements=200_000))


@pytest.fixture(scope="module")
def lshape_runs():
    runs, elapsed = {}, 0.0
    for p in range(1, 5):
        runs[p], seconds = timed(afem_loop, lshape_problem(), LoopConfig(max_dofs=100_000, order=p))
        elapsed += seconds
    return runs, elapsed


def test_criterion_1_poisson_unit_square(poisson_run, capsys):
    history, seconds = poisson_run
    slope = history.slope("estimator")
    ok = abs(slope + 0.5) <= 0.07 and seconds < 60
    report(capsys, 1, ok, f"slope {slope:+.3f} (target -0.5 +- 0.07), {len(history)} levels, "
                          f"final {history[-1].nElements} elements, {seconds:.1f} s (< 60 s)")


def test_criterion_2_lshape_rates(lshape_runs, capsys):
    runs, seconds = lshape_runs
    parts, ok = [], seconds < 300
    for p, history in runs.items():
        eta = history.slope("estimator")
        err = history.slope("H1Error")
        good = abs(eta + p / 2) <= 0.1 * p and abs(err - eta) <= 0.1
        ok &= good
        parts.append(f"p={p}: eta {eta:+.3f}, err {err:+.3f}{'' if good else ' !'}")
    report(capsys, 2, ok, "; ".join(parts) + f"; total {seconds:.1f} s (< 300 s)")


def test_criterion_3_efficiency_bounded(lshape_runs, capsys):
    runs, _ = lshape_runs
    parts, ok = [], True
    for p, history in runs.items():
        ratio = history.column("estimator") / history.column("H1Error")
        spread = ratio.max() / ratio.min()
        ok &= bool(np.all(np.isfinite(ratio))) and spread <= 100
        parts.append(f"p={p}: {spread:.2f}")
    report(capsys, 3, ok, "max/min of eta/err: " + ", ".join(parts) + " (<= 100)")


def test_criterion_4_goafem_rates(capsys):
    parts, ok = [], True
    for p, target, tol in ((1, -1.0, 0.15), (3, -3.0, 0.3)):
        history = goafem_loop(LoopConfig(max_dofs=100_000, order=p))
        slope = history.slope("goalEstimate")
        ok &= abs(slope - target) <= tol
        parts.append(f"p={p}: {slope:+.3f} (target {target:+.0f} +- {tol})")
    report(capsys, 4, ok, "estimator product slope " + ", ".join(parts))


def test_criterion_5_ailfem(capsys):
    finals, parts, ok = {}, [], True
    for method in ("zarantonello", "kacanov", "newton"):
        history = ailfem_loop(LoopConfig(max_dofs=50_000, method=method, delta=0.5))
        slope = history.slope("estimator")
        ok &= abs(slope + 0.5) <= 0.1
        finals[method] = history[-1].estimator
        parts.append(f"{method} {slope:+.3f}")
    spread = max(finals.values()) / min(finals.values()) - 1
    ok &= spread <= 0.2
    report(capsys, 5, ok, "slopes " + ", ".join(parts)
           + f" (target -0.5 +- 0.1); final estimators differ by {100 * spread:.1f}% (<= 20%)")


def test_criterion_6_linear_scaling(poisson_run, capsys):
    history, _ = poisson_run
    dofs = history.column("nDofs")
    last = dofs >= dofs[-1] / 10
    phases = {"assembly": history.column("tAssembleA") + history.column("tAssembleF"),
              "estimation": history.column("tEstimate"),
              "marking": history.column("tMark"),
              "refinement": history.column("tRefine")}
    parts, ok = [], True
    for name, seconds in phases.items():
        per_dof = seconds[last] / dofs[last]
        spread = per_dof.max() / per_dof.min()
        ok &= spread <= 4
        parts.append(f"{name} {spread:.2f}")
    report(capsys, 6, ok, "max/min time per DOF over the last decade: " + ", ".join(parts) + " (<= 4)")


REFERENCE_COORDINATES = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0], [0.5, 0.5]])
REFERENCE_ELEMENTS = np.array([[0, 1, 4], [1, 2, 4], [2, 3, 4], [3, 0, 4]])
REFERENCE_BOUNDARY_INPUT = [np.array([[0, 1], [3, 0]]), np.array([[1, 2], [2, 3]])]
# expected connectivity tables, 1-based, one column per entity
REFERENCE_EDGES = np.array([[1, 4, 1, 2, 2, 3, 3, 4],
                            [2, 1, 5, 3, 5, 4, 5, 5]])
REFERENCE_ELEMENT2EDGES = np.array([[1, 4, 6, 2],
                                    [5, 7, 8, 3],
                                    [3, 5, 7, 8]])
REFERENCE_BOUNDARIES = [np.array([1, 2]), np.array([4, 6])]


def test_criterion_7_fixture_tables(capsys):
    mesh = mesh_from_arrays(REFERENCE_COORDINATES, REFERENCE_ELEMENTS, REFERENCE_BOUNDARY_INPUT)
    checks = {
        "edges": np.array_equal(mesh.edges.T + 1, REFERENCE_EDGES),
        "element2edges": np.array_equal(mesh.element2edges.T + 1, REFERENCE_ELEMENT2EDGES),
        "boundaries": len(mesh.boundaries) == 2 and all(
            np.array_equal(np.asarray(got) + 1, want)
            for got, want in zip(mesh.boundaries, REFERENCE_BOUNDARIES)),
    }
    report(capsys, 7, all(checks.values()),
           ", ".join(f"{k} {'verbatim' if v else 'MISMATCH'}" for k, v in checks.items()))


# ---------------------------------------------------------------------------
# criterion 8: property suites


def suite_quadrature():
    worst = 0.0
    for order in range(1, 10):
        qr = quadrature_of_order(order, "2D")
        lam = qr.bary.coords
        for a in range(order + 1):
            for b in range(order + 1 - a):
                exact = factorial(a) * factorial(b) / factorial(a + b + 2)
                approx = 0.5 * qr.weights @ (lam[:, 1] ** a * lam[:, 2] ** b)
                worst = max(worst, abs(approx - exact))
        qr = quadrature_of_order(order, "1D")
        t = qr.bary.coords[:, 1]
        for k in range(order + 1):
            worst = max(worst, abs(qr.weights @ t ** k - 1 / (k + 1)))
    return worst <= 1e-12, f"max error {worst:.1e}"


def suite_euler_conformity():
    mesh = load_geometry("Lshape")
    rng = np.random.default_rng(7)
    for _ in range(15):
        mesh.refine_locally(rng.choice(mesh.n_elements, min(10, mesh.n_elements), replace=False), "nvb")
        assert euler_characteristic(mesh) == 1
        assert_conforming(mesh)
    area = mesh.affine_transformation().area.sum()
    return bool(np.isclose(area, 3.0)), f"{mesh.n_elements} elements"


def suite_patch():
    worst = 0.0
    for p in range(1, 5):
        mesh = square_with_left_dirichlet(2)
        u, laplace, flux = patch_solution(p)
        space = FeSpace(mesh, LagrangeH1(p), dirichlet=0)
        blf, lf = BilinearForm(space), LinearForm(space)
        blf.a = Constant(mesh, 1.0)
        lf.f = MeshFunction(mesh, lambda x, laplace=laplace: -laplace(x))
        lf.neumann = MeshFunction(mesh, flux)
        lf.bnd_neumann = 1
        uh = np.zeros(space.n_dofs)
        uh[space.free_dofs] = solve(assemble(blf), assemble(lf), space.free_dofs)
        worst = max(worst, np.abs(uh - nodal_interpolation(MeshFunction(mesh, u), space)).max())
    return worst <= 1e-9, f"max error {worst:.1e}"


def suite_prolongation():
    worst = 0.0
    for strategy in ("nvb", "nvb1", "nvb5", "rgb"):
        for p in range(1, 5):
            mesh = load_geometry("Lshape")
            space = FeSpace(mesh, LagrangeH1(p))
            poly = MeshFunction(mesh, lambda x, p=p: (1 + x[0] - 3 * x[1]) ** p - x[0] * x[1] ** (p - 1))
            u = FeFunction(space, nodal_interpolation(poly, space))
            P = Prolongation(space)
            rng = np.random.default_rng(p)
            for _ in range(3):
                mesh.refine_locally(rng.choice(mesh.n_elements, mesh.n_elements // 3 + 1, replace=False),
                                    strategy)
                u.set_data(P.prolongate(u))
                worst = max(worst, np.abs(u.data - nodal_interpolation(poly, space)).max())
    return worst <= 1e-12, f"max error {worst:.1e}"


def suite_vector_product():
    rng = np.random.default_rng(3)
    worst = 0.0
    for _ in range(200):
        r, k, c = rng.integers(1, 5, size=3)
        ta, tb = rng.integers(0, 2, size=2).astype(bool)
        A = rng.normal(size=(r * k, 3, 2))
        B = rng.normal(size=(k * c, 3, 2))
        size_a = ((k, r) if ta else (r, k), bool(ta))
        size_b = ((c, k) if tb else (k, c), bool(tb))
        C = vector_product(A, B, size_a, size_b)
        for i in range(3):
            for j in range(2):
                a = A[:, i, j].reshape(size_a[0], order="F")
                b = B[:, i, j].reshape(size_b[0], order="F")
                ref = ((a.T if ta else a) @ (b.T if tb else b)).ravel(order="F")
                worst = max(worst, np.abs(C[:, i, j] - ref).max())
    return worst <= 1e-13, f"max deviation {worst:.1e}"


def suite_doerfler():
    rng = np.random.default_rng(11)
    for _ in range(40):
        n = int(rng.integers(1, 16))
        eta2 = rng.integers(0, 7, size=n).astype(float)
        theta = float(rng.uniform(0.05, 1.0))
        marked = mark_doerfler(eta2, theta)
        total = eta2.sum()
        if total == 0:
            assert marked.size == 0
            continue
        assert eta2[marked].sum() >= theta * total
        for k in range(marked.size):
            assert all(eta2[list(s)].sum() < theta * total for s in combinations(range(n), k))
    return True, "40 random cases up to 15 elements"


def suite_criss_cross():
    mesh = mesh_from_arrays(REFERENCE_COORDINATES, REFERENCE_ELEMENTS, REFERENCE_BOUNDARY_INPUT)
    space = FeSpace(mesh, LagrangeH1(1))
    blf, lf = BilinearForm(space), LinearForm(space)
    blf.a = Constant(mesh, 1.0)
    lf.f = Constant(mesh, 1.0)
    u5 = solve(assemble(blf), assemble(lf), space.free_dofs)[0]
    return abs(u5 - 1 / 12) <= 1e-12, f"u5 - 1/12 = {u5 - 1 / 12:.1e}"


SUITES = {"quadrature": suite_quadrature, "euler/conformity": suite_euler_conformity,
          "patch": suite_patch, "prolongation": suite_prolongation,
          "vector_product": suite_vector_product, "doerfler": suite_doerfler,
          "criss-cross": suite_criss_cross}


def test_criterion_8_property_suites(capsys):
    parts, ok = [], True
    for name, suite in SUITES.items():
        try:
            (good, detail), seconds = timed(suite)
        except AssertionError as exc:
            good, detail, seconds = False, f"assertion failed: {exc}", 0.0
        good = good and seconds < 30
        ok &= good
        parts.append(f"{name} {'ok' if good else 'FAILED'} ({detail}, {seconds:.2f} s)")
    report(capsys, 8, ok, "; ".join(parts))
