"""Command line interface.

insulate run <config.json> [--levels K] [--mode uniform|adaptive]
             [--check] [--out DIR]
insulate mesh <file> [--refine K] [--out FILE]

Exit codes: 0 success, 1 failed check, 2 input error.
"""

import argparse
import sys

from . import harness, mesh as meshmod


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="insulate",
        description="Duality-based solver for optimal insulation problems")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment from a JSON config")
    run.add_argument("config", help="path to the experiment config")
    run.add_argument("--levels", type=int, default=None)
    run.add_argument("--mode", choices=("uniform", "adaptive"), default=None)
    run.add_argument("--check", action="store_true",
                     help="evaluate the experiment's acceptance checks")
    run.add_argument("--out", default=None, help="output directory")

    mesh_cmd = sub.add_parser("mesh", help="validate or refine a mesh file")
    mesh_cmd.add_argument("file")
    mesh_cmd.add_argument("--refine", type=int, default=0,
                          help="apply K uniform refinements")
    mesh_cmd.add_argument("--out", default=None,
                          help="write the (refined) mesh here")
    return parser


def main(argv=None):
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        try:
            config = harness.ExperimentConfig.from_json(
                args.config, levels=args.levels, mode=args.mode,
                out=args.out)
        except (OSError, ValueError, KeyError) as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
        try:
            return harness.run_experiment(config, check=args.check)
        except ValueError as exc:
            print(f"error: {exc}", file=sys.stderr)
            return 2
    if args.command == "mesh":
        try:
            m = meshmod.read_mesh(args.file)
        except (OSError, meshmod.MeshError, ValueError) as exc:
            print(f"invalid mesh: {exc}", file=sys.stderr)
            return 2
        for _ in range(args.refine):
            m = meshmod.uniform_refine(m)
        print(f"vertices: {m.n_vertices}  elements: {m.n_elements}  "
              f"sides: {m.n_sides}  boundary sides: {len(m.boundary_sides)}")
        print(f"area: {m.domain_area!r}  min angle: {m.min_angle()!r} rad")
        labels = {lab: int((m.boundary_label == lab).sum())
                  for lab in ("I", "D", "N")}
        print(f"boundary labels: {labels}")
        if args.out:
            meshmod.write_mesh(m, args.out)
        return 0
    return 2


if __name__ == "__main__":
    sys.exit(main())
