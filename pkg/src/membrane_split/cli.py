"""Command-line entry point: ``membrane-split run|mesh-info|probes``.

Exit status is 0 on success, 2 for a configuration error and 3 for a
numerical failure (singular system, non-finite field, off-grid point).
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from .exceptions import ConfigError, MembraneSplitError
from .experiments import load_spec, mesh_for, run_experiment
from .mesh import mesh_size

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3


def _overrides(args) -> dict:
    return {
        "levels": args.levels,
        "epsilon": args.epsilon,
        "quad_degree": args.quad_degree,
        "output": args.output,
    }


def _add_overrides(p: argparse.ArgumentParser):
    p.add_argument("config", help="key = value experiment config")
    p.add_argument("--levels", help='level range, e.g. "1-5" or "0,2,4"')
    p.add_argument("--epsilon", help="fixed or starting penalty parameter")
    p.add_argument("--quad-degree", dest="quad_degree", help="quadrature degree (1-6)")
    p.add_argument("--output", help="output path")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="membrane-split",
        description="Point-constrained membrane problems with P1 surface finite elements.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    _add_overrides(sub.add_parser("run", help="run a convergence experiment, write CSV"))
    _add_overrides(sub.add_parser("probes", help="run the structural probe suite"))
    info = sub.add_parser("mesh-info", help="print statistics of an experiment mesh")
    info.add_argument("--problem", choices=("flat", "sphere"), required=True)
    info.add_argument("--level", type=int, required=True)
    info.add_argument(
        "--family", choices=("polar", "octa"), default="polar", help="sphere mesh family"
    )
    return parser


def _cmd_run(args) -> int:
    spec = load_spec(args.config, _overrides(args))
    if spec.name == "probes":
        raise ConfigError("use the 'probes' subcommand for probe configs")
    table = run_experiment(spec)
    if not spec.output:
        sys.stdout.write(table.to_csv())
    else:
        print(f"wrote {spec.output} ({len(table.rows)} rows)")
    return EXIT_OK


def _cmd_probes(args) -> int:
    spec = load_spec(args.config, _overrides(args))
    if spec.name != "probes":
        raise ConfigError(f"config describes experiment {spec.name!r}, not 'probes'")
    reports = run_experiment(spec)
    for r in reports:
        print(r.line())
    return EXIT_OK if all(r.verdict for r in reports) else EXIT_NUMERICAL


def _cmd_mesh_info(args) -> int:
    try:
        mesh = mesh_for(args.problem, args.level, args.family)
    except MembraneSplitError as exc:
        raise ConfigError(str(exc)) from exc
    st = mesh_size(mesh)
    family = "ring-disc" if args.problem == "flat" else f"{args.family}-sphere"
    print(f"family: {family}")
    print(f"level: {args.level}")
    print(f"h: {st.h:.6e}")
    print(f"vertices: {st.num_vertices}")
    print(f"triangles: {st.num_triangles}")
    print(f"total_area: {st.total_area:.6e}")
    print(f"boundary_vertices: {len(mesh.boundary_vertices)}")
    for label, v in mesh.constraint_vertices.items():
        x = np.array2string(mesh.vertices[v], precision=6, separator=", ")
        print(f"constraint {label}: vertex {v} at {x}")
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {"run": _cmd_run, "probes": _cmd_probes, "mesh-info": _cmd_mesh_info}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (MembraneSplitError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
