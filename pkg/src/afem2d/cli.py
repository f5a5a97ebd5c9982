"""Command line interface for the adaptive experiments.

Examples::

    afem2d poisson --max-elements 200000 --out poisson.csv
    afem2d lshape --order 3 --max-dofs 1e5
    afem2d goafem --order 1 --strategy nvb
    afem2d ailfem --method newton --max-dofs 5e4
    afem2d export-mesh adapted/ --experiment lshape --order 2 --max-dofs 2e4
"""
from __future__ import annotations

import argparse
import logging
import sys

from .afem import (LINEARIZATIONS, LoopConfig, afem_loop, ailfem_loop,
                   goafem_loop, lshape_problem, unit_square_problem)
from .mesh import export_geometry, load_geometry
from .refinement import Strategy

log = logging.getLogger("afem2d")

DEFAULT_GEOMETRY = {"poisson": "unitsquare", "lshape": "Lshape", "goafem": "unitsquare",
                    "ailfem": "Lshape"}


def _count(text):
    value = float(text)
    if value <= 0 or value != int(value):
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text}")
    return int(value)


def _theta(text):
    value = float(text)
    if not 0 < value <= 1:
        raise argparse.ArgumentTypeError("theta must lie in (0, 1]")
    return value


def _strategy(text):
    try:
        Strategy.parse(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None
    return text


def _add_common(parser, max_dofs=100_000):
    parser.add_argument("--theta", type=_theta, default=0.5, help="Dörfler parameter (default 0.5)")
    parser.add_argument("--max-dofs", type=_count, default=max_dofs,
                        help="stop once the space has at least this many DOFs")
    parser.add_argument("--strategy", type=_strategy, default="nvb",
                        help="refinement strategy: nvb, nvb1, nvb5, rgb, nvbedge")
    parser.add_argument("--geometry", default=None,
                        help="bundled geometry name or directory with .dat files")
    parser.add_argument("--solver", choices=("direct", "cg"), default="direct")
    parser.add_argument("--out", default=None, help="write the convergence history to this CSV file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="afem2d", description="Adaptive finite element experiments.")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("poisson", help="-Laplace u = 1 on the unit square, P1")
    _add_common(p, max_dofs=None)
    p.add_argument("--max-elements", type=_count, default=None,
                   help="stop once the mesh has this many elements (default 1e6 without --max-dofs)")

    p = sub.add_parser("lshape", help="harmonic corner singularity on the L-shape")
    _add_common(p)
    p.add_argument("--order", type=int, default=1, choices=range(1, 10), metavar="P")
    p.add_argument("--error", choices=("quadrature", "interpolant"), default="quadrature",
                   help="how the energy error column is computed")

    p = sub.add_parser("goafem", help="goal-oriented AFEM with discontinuous data")
    _add_common(p)
    p.add_argument("--order", type=int, default=1, choices=range(1, 10), metavar="P")

    p = sub.add_parser("ailfem", help="quasilinear problem with iterative linearization")
    _add_common(p, max_dofs=50_000)
    p.add_argument("--method", choices=LINEARIZATIONS, default="zarantonello")
    p.add_argument("--delta", type=float, default=0.5, help="Zarantonello damping (default 0.5)")

    p = sub.add_parser("export-mesh", help="write a (possibly adapted) mesh in the .dat format")
    p.add_argument("directory")
    p.add_argument("--geometry", default=None)
    p.add_argument("--experiment", choices=("none",) + tuple(DEFAULT_GEOMETRY), default="none")
    p.add_argument("--uniform", type=int, default=0, help="uniform refinements before export")
    p.add_argument("--order", type=int, default=1)
    p.add_argument("--method", choices=LINEARIZATIONS, default="zarantonello")
    p.add_argument("--theta", type=_theta, default=0.5)
    p.add_argument("--max-dofs", type=_count, default=10_000)
    p.add_argument("--strategy", type=_strategy, default="nvb")
    return parser


def _run(command, args, geometry, callback=None):
    if command == "poisson":
        max_elements = args.max_elements
        if max_elements is None and args.max_dofs is None:
            max_elements = 1_000_000
        config = LoopConfig(theta=args.theta, max_dofs=args.max_dofs, max_elements=max_elements,
                            strategy=args.strategy, solver=args.solver)
        return afem_loop(unit_square_problem(geometry), config, callback=callback)
    if command == "lshape":
        config = LoopConfig(theta=args.theta, max_dofs=args.max_dofs, order=args.order,
                            strategy=args.strategy, solver=args.solver, energy_error=args.error)
        return afem_loop(lshape_problem(geometry), config, callback=callback)
    if command == "goafem":
        config = LoopConfig(theta=args.theta, max_dofs=args.max_dofs, order=args.order,
                            strategy=args.strategy, solver=args.solver)
        return goafem_loop(config, geometry, callback=callback)
    if command == "ailfem":
        config = LoopConfig(theta=args.theta, max_dofs=args.max_dofs, method=args.method,
                            delta=args.delta, strategy=args.strategy, solver=args.solver)
        return ailfem_loop(config, geometry, callback=callback)
    raise ValueError(command)


def _print_history(history, out):
    out.write(f"{'level':>5} {'nDofs':>9} {'estimator':>12} {'H1Error':>12} {'goal':>12} {'tTotal':>9}\n")
    for r in history:
        out.write(f"{r.level:5d} {r.nDofs:9d} {r.estimator:12.4e} {r.H1Error:12.4e} "
                  f"{r.goalEstimate:12.4e} {r.tTotal:9.3f}\n")


def _export(args):
    if args.experiment == "none":
        mesh = load_geometry(args.geometry or "unitsquare")
        if args.uniform:
            mesh.refine_uniform(args.uniform, args.strategy)
    else:
        geometry = args.geometry or DEFAULT_GEOMETRY[args.experiment]
        holder = {}

        def grab(level, mesh, *functions):
            holder["mesh"] = mesh

        args.solver, args.out, args.delta, args.error = "direct", None, 0.5, "quadrature"
        args.max_elements = None
        _run(args.experiment, args, geometry, callback=grab)
        mesh = holder["mesh"]
    export_geometry(mesh, args.directory)
    print(f"wrote {mesh.n_vertices} vertices, {mesh.n_elements} elements to {args.directory}")
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    if args.command == "export-mesh":
        return _export(args)
    geometry = args.geometry or DEFAULT_GEOMETRY[args.command]
    log.info("running %s on %s", args.command, geometry)
    history = _run(args.command, args, geometry)
    _print_history(history, sys.stdout)
    if args.out:
        history.to_csv(args.out)
        log.info("history written to %s", args.out)
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
