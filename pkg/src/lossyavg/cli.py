"""Command line entry point: ``lossyavg <command> --config cfg.json``."""

from __future__ import annotations

import argparse
import sys

from . import experiments
from .experiments import ConfigError, ExperimentConfig

COMMANDS = {
    "bounds": experiments.cmd_bounds,
    "simulate": experiments.cmd_simulate,
    "rd-curve": experiments.cmd_rd_curve,
    "optimize-q": experiments.cmd_optimize_q,
    "verify": experiments.cmd_verify,
}

EXIT_OK, EXIT_INVALID, EXIT_VERIFY_FAILED = 0, 1, 2


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lossyavg", description="Lossy averaging simulator and bounds.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", required=True, help="JSON experiment config")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=None, help="master seed (overrides config)")
        p.add_argument("--threads", type=int, default=None, help="worker threads")
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; that code is reserved for failed verification
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        cfg = ExperimentConfig.load(args.config)
        if args.seed is not None:
            if not 0 <= args.seed < 2 ** 64:
                raise ConfigError("--seed must be an unsigned 64-bit integer")
            cfg.seed = args.seed
            cfg.raw = {**cfg.raw, "seed": args.seed}
        if args.threads is not None:
            if args.threads < 1:
                raise ConfigError("--threads must be >= 1")
            cfg.threads = args.threads
        out = COMMANDS[args.command](cfg)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    for path in out.write(args.out):
        print(f"wrote {path}")
    if out.summary:
        print(out.summary)
    return out.status


if __name__ == "__main__":
    sys.exit(main())
