"""Command line interface.

Subcommands: ``run`` (full simulation from a scenario file), ``check``
(assumption validation only), ``bench`` (built-in benchmark with verdict
table), ``mesh gen`` (emit a mesh file).  Exit codes: 0 on success, 1 on
solver or guard failure (including failed checks/benchmarks), 2 on usage
or parse errors.
"""

import argparse
import os
import sys

from .benchmarks import BENCHMARKS, run_benchmark
from .coupled import run_coupled, write_outputs
from .errors import (InvalidTagRule, MorphosimError, ParseError,
                     ValidationError)
from .mesh import rectangle_mesh, write_mesh
from .scenario import load_scenario, require_valid, validate_scenario


def _add_run_options(parser):
    parser.add_argument("--output-dir", default=None,
                        help="directory for CSV and field output")
    parser.add_argument("--dt", type=float, default=None,
                        help="override the scenario time step")
    parser.add_argument("--t-end", type=float, default=None,
                        help="override the scenario end time")
    parser.add_argument("--method", default=None,
                        choices=["fixed_point", "newton", "hybrid"],
                        help="override the equilibrium solver method")
    parser.add_argument("--cold-start", action="store_true",
                        help="disable warm starting between steps")
    parser.add_argument("--verbose", action="store_true",
                        help="stream per-iteration diagnostics to stderr")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="morphosim",
        description="Finite-element simulation of nutrient-driven "
                    "morphoelastic growth")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run a scenario file")
    p_run.add_argument("scenario")
    _add_run_options(p_run)

    p_check = sub.add_parser("check", help="validate scenario assumptions")
    p_check.add_argument("scenario")

    p_bench = sub.add_parser("bench", help="run a built-in benchmark")
    p_bench.add_argument("name", choices=sorted(BENCHMARKS))
    _add_run_options(p_bench)

    p_mesh = sub.add_parser("mesh", help="mesh utilities")
    mesh_sub = p_mesh.add_subparsers(dest="mesh_command", required=True)
    p_gen = mesh_sub.add_parser("gen", help="generate a rectangle mesh file")
    p_gen.add_argument("--nx", type=int, required=True)
    p_gen.add_argument("--ny", type=int, required=True)
    p_gen.add_argument("--out", required=True)
    p_gen.add_argument("--mode", default="crossed",
                       choices=["crossed", "diagonal"])
    p_gen.add_argument("--extent", default="0,0,1,1",
                       help="x0,y0,x1,y1 of the box")
    p_gen.add_argument("--elastic-dirichlet", default="all")
    p_gen.add_argument("--nutrient-dirichlet", default="all")
    return parser


def _apply_overrides(scenario, args):
    from .growth import TimeGrid
    if args.dt is not None or args.t_end is not None:
        grid = scenario.time
        scenario.time = TimeGrid(
            t_end=args.t_end if args.t_end is not None else grid.t_end,
            dt=args.dt if args.dt is not None else grid.dt,
            t0=grid.t0, adaptive=grid.adaptive)
    if args.method is not None:
        scenario.solver.method = args.method
    if args.cold_start:
        scenario.solver.warm_start = False
    if args.verbose:
        scenario.solver.diagnostics = sys.stderr
    if args.output_dir is not None:
        scenario.output.directory = args.output_dir


def _cmd_run(args):
    scenario = load_scenario(args.scenario)
    _apply_overrides(scenario, args)
    require_valid(validate_scenario(scenario))
    trajectory = run_coupled(scenario)
    paths = write_outputs(trajectory, scenario.mesh, scenario.output)
    if args.verbose:
        for p in paths:
            print("wrote %s" % p, file=sys.stderr)
    if trajectory.failed:
        print("morphosim: %s halted (%s): %s"
              % (scenario.name, trajectory.status, trajectory.error),
              file=sys.stderr)
        return 1
    print("completed %s: %d snapshots, final t = %.17g"
          % (scenario.name, len(trajectory.states),
             trajectory.states[-1].t))
    return 0


def _cmd_check(args):
    scenario = load_scenario(args.scenario)
    reports = validate_scenario(scenario)
    for report in reports:
        print(report)
    return 0 if all(r.passed for r in reports) else 1


def _cmd_bench(args):
    overrides = {"dt": args.dt, "t_end": args.t_end, "method": args.method}
    if args.cold_start:
        overrides["warm_start"] = False
    result = run_benchmark(args.name, **overrides)
    print(result.table())
    if result.trajectory is not None:
        outdir = args.output_dir or os.path.join("out", args.name)
        write_outputs(result.trajectory, result.mesh, outdir)
        if result.trajectory.failed:
            print("morphosim: benchmark trajectory halted (%s): %s"
                  % (result.trajectory.status, result.trajectory.error),
                  file=sys.stderr)
            return 1
    return 0 if result.passed else 1


def _cmd_mesh(args):
    try:
        x0, y0, x1, y1 = (float(v) for v in args.extent.split(","))
    except ValueError:
        raise ParseError("--extent expects x0,y0,x1,y1")
    mesh = rectangle_mesh(args.nx, args.ny, extent=((x0, y0), (x1, y1)),
                          mode=args.mode,
                          elastic_dirichlet=args.elastic_dirichlet,
                          nutrient_dirichlet=args.nutrient_dirichlet)
    write_mesh(mesh, args.out)
    print("wrote %s (%d vertices, %d cells)"
          % (args.out, mesh.num_vertices, mesh.num_cells))
    return 0


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "check":
            return _cmd_check(args)
        if args.command == "bench":
            return _cmd_bench(args)
        if args.command == "mesh":
            return _cmd_mesh(args)
        parser.error("unknown command")
    except (ParseError, InvalidTagRule) as exc:
        print("morphosim: %s" % exc, file=sys.stderr)
        return 2
    except ValidationError as exc:
        print("morphosim: scenario invalid: %s" % exc, file=sys.stderr)
        return 1
    except MorphosimError as exc:
        print("morphosim: %s: %s" % (type(exc).__name__, exc),
              file=sys.stderr)
        return 1
    return 2


if __name__ == "__main__":
    sys.exit(main())
