"""Command-line interface.

    recon run <config> [--set k=v]... [--threads N] [--seed S] [--quiet]
    recon geom <config> [--png PATH]
    recon formats

Exit codes: 0 success, 2 config error, 3 runtime error, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys

from .fbp import FILTER_KINDS
from .fileio import NativeFormatError
from .geometry import GeometryError
from .pipeline import (ConfigError, PipelineRuntimeError, SOLVERS,
                       STAGE_KINDS, describe_geometry,
                       draw_geometry_schematic, run_pipeline)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3
EXIT_IO = 4


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="recon",
        description="Run declarative tomographic reconstruction pipelines.")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="execute a pipeline config")
    run.add_argument("config", help="path to a YAML pipeline config")
    run.add_argument("--set", dest="overrides", action="append",
                     default=[], metavar="KEY=VALUE",
                     help="override a config leaf by dotted path")
    run.add_argument("--threads", type=int, default=None,
                     help="worker hint; results are independent of it")
    run.add_argument("--seed", type=int, default=None,
                     help="noise seed when the config does not pin one")
    run.add_argument("--quiet", action="store_true",
                     help="suppress per-stage timing output")

    geom = sub.add_parser("geom", help="describe the configured geometry")
    geom.add_argument("config", help="path to a YAML pipeline config")
    geom.add_argument("--png", default=None, metavar="PATH",
                      help="also write a schematic image")

    sub.add_parser("formats", help="list supported formats and methods")
    return parser


def _cmd_run(args):
    result = run_pipeline(args.config, overrides=args.overrides,
                          threads=args.threads, seed=args.seed,
                          quiet=args.quiet)
    if not args.quiet:
        total = sum(dt for _, dt in result.timings)
        print(f"  total compute time           {total:8.3f} s")
        for artifact in result.artifacts:
            print(f"  wrote {artifact}")
    return EXIT_OK


def _cmd_geom(args):
    sys.stdout.write(describe_geometry(args.config))
    if args.png:
        draw_geometry_schematic(args.config, args.png)
        print(f"schematic written to {args.png}")
    return EXIT_OK


def _cmd_formats(_args):
    print("inputs:   phantom simulation, native container (.tkn), "
          "TIFF stack")
    print("outputs:  native container, TIFF stack (float32), PNG heatmap, "
          "objective CSV, metrics JSON")
    print(f"solvers:  {', '.join(SOLVERS)}")
    print(f"stages:   {', '.join(STAGE_KINDS)}")
    print(f"filters:  {', '.join(FILTER_KINDS)}")
    return EXIT_OK


def main(argv=None):
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "geom":
            return _cmd_geom(args)
        return _cmd_formats(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NativeFormatError, OSError) as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (PipelineRuntimeError, GeometryError, ValueError) as exc:
        print(f"runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
