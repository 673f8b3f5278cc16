"""Command line: ``massfree solve|converge|mesh-info``."""
from __future__ import annotations

import argparse
import logging
import sys

from .config import ConfigError, load_config
from .dec import BlowUpError, InfiniteTimeStepError
from .mesh import MeshError, mesh_info, read_mesh
from .space import NonPositiveLumping


def _solve(args) -> int:
    from .driver import run

    cfg = load_config(args.config, args.override)
    res = run(cfg)
    print(f"dofs {res.space.n_dofs} steps {res.steps} dt {res.dt!r}")
    print(f"min {float(res.field.min())!r} max {float(res.field.max())!r}")
    print(f"l2_error {res.error!r}")
    if res.oracle_error is not None:
        print(f"oracle_l2_error {res.oracle_error!r} difference {res.oracle_difference!r}")
    print(f"output {res.output_dir}")
    return 0


def _converge(args) -> int:
    from .driver import run_convergence

    cfg = load_config(args.config, args.override)
    table = run_convergence(cfg)
    sys.stdout.write(table.to_csv())
    return 0


def _mesh_info(args) -> int:
    info = mesh_info(read_mesh(args.meshfile))
    for key, value in info.items():
        print(f"{key} {value}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="massfree", description="Mass-free residual distribution solver")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="run one configured case")
    s.add_argument("--config", required=True)
    s.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    s.set_defaults(func=_solve)

    c = sub.add_parser("converge", help="mesh convergence study over 'meshes'")
    c.add_argument("--config", required=True)
    c.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    c.set_defaults(func=_converge)

    m = sub.add_parser("mesh-info", help="summary of an ASCII mesh file")
    m.add_argument("meshfile")
    m.set_defaults(func=_mesh_info)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except BlowUpError as exc:
        print(f"error: blow-up at step {exc.step}: {exc}", file=sys.stderr)
        return 3
    except (ConfigError, MeshError, NonPositiveLumping, InfiniteTimeStepError,
            FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
