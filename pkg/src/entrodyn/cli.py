"""Command-line entry point.

Subcommands: ``run``, ``crosscheck``, ``converge``, ``validate-config``,
``list-presets``. Output directory resolution: ``--out`` flag, then the
ENTRODYN_OUT environment variable, then the config's ``[run] out``,
then ``runs/<solver>``.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from .config import RunConfig, SOLVERS, parse_config_file, serialize_config
from .drivers import convergence_study, execute, write_convergence_outputs
from .errors import ConfigError, EntrodynError
from .presets import INITIAL_PRESETS

ENV_OUT = "ENTRODYN_OUT"


def _add_common(sub):
    sub.add_argument("--config", required=True, type=Path, help="run configuration file")
    sub.add_argument("--out", type=Path, default=None, help="output directory")
    sub.add_argument("--seed", type=int, default=None, help="override the configured seed")
    sub.add_argument("--quiet", action="store_true", help="suppress progress output")


def _resolve_out(args, rc: RunConfig) -> Path:
    if args.out is not None:
        return args.out
    env = os.environ.get(ENV_OUT)
    if env:
        return Path(env)
    if rc.out:
        return Path(rc.out)
    return Path("runs") / rc.solver


def _load(args) -> RunConfig:
    rc = parse_config_file(args.config)
    if args.seed is not None:
        rc = rc.with_(seed=args.seed)
    return rc


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="entrodyn",
        description="Entropic diffusion, density/phase, and wave dynamics on curved spaces",
    )
    subs = parser.add_subparsers(dest="command", required=True)

    run_p = subs.add_parser("run", help="execute the solver selected in the config")
    _add_common(run_p)

    cross_p = subs.add_parser("crosscheck", help="walker vs density-solver comparison")
    _add_common(cross_p)

    conv_p = subs.add_parser("converge", help="halving study of the configured problem")
    _add_common(conv_p)
    conv_p.add_argument("--halvings", type=int, default=3, help="number of halvings (>= 2)")
    conv_p.add_argument(
        "--budget", type=float, default=600.0, help="wall-clock budget in seconds"
    )

    val_p = subs.add_parser("validate-config", help="parse and validate a config file")
    val_p.add_argument("--config", required=True, type=Path)
    val_p.add_argument("--quiet", action="store_true")

    subs.add_parser("list-presets", help="show available named presets")

    args = parser.parse_args(argv)

    try:
        if args.command == "list-presets":
            print("charts: flat, circle, sphere, torus")
            print("initial:", ", ".join(INITIAL_PRESETS))
            print("phase: zero, plane-wave, sine")
            print("potential V:", "zero, harmonic")
            print("potential V_c:", "zero, scalar-curvature")
            print("solvers:", ", ".join(SOLVERS))
            return 0

        if args.command == "validate-config":
            rc = parse_config_file(args.config)
            rc.validate()
            if not args.quiet:
                print("config ok")
                print(serialize_config(rc), end="")
            return 0

        rc = _load(args)
        if args.command == "crosscheck":
            rc = rc.with_(solver="crosscheck")
        out_dir = _resolve_out(args, rc)

        if args.command == "converge":
            reports = convergence_study(rc, args.halvings, wall_clock_budget=args.budget)
            result = write_convergence_outputs(reports, rc, out_dir, quiet=args.quiet)
        else:
            result = execute(rc, out_dir, quiet=args.quiet)
        if not args.quiet and result.manifest_path:
            print(f"manifest: {result.manifest_path}")
        return result.exit_code
    except ConfigError as exc:
        loc = f" [{exc.field}]" if exc.field else ""
        print(f"config error{loc}: {exc}", file=sys.stderr)
        return 2
    except EntrodynError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
