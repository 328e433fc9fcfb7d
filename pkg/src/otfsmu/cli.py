"""Command-line entry point: ``otfsmu <subcommand> [options]``.

Exit status is 0 on success, 1 for configuration or usage errors and 2 when
a run fails.
"""
from __future__ import annotations

import argparse
import logging
import sys

from . import __version__
from .harness import (
    ConfigError,
    SimConfig,
    SweepError,
    load_config,
    run_ber_sweep,
    run_complexity_report,
    run_nmse_sweep,
    run_threshold_sweep,
)

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2

SWEEPS = {
    "nmse-sweep": run_nmse_sweep,
    "ber-sweep": run_ber_sweep,
    "threshold-sweep": run_threshold_sweep,
    "complexity": run_complexity_report,
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="otfsmu", description="Multi-user OTFS channel estimation and detection sweeps.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name in SWEEPS:
        p = sub.add_parser(name, help=f"run the {name.replace('-', ' ')}")
        p.add_argument("--config", help="key = value config file")
        p.add_argument("--seed", type=int)
        p.add_argument("--trials", type=int)
        p.add_argument("--users", help="comma-separated user counts, overrides the config")
        p.add_argument("--out", help="output path (default: stdout)")
        p.add_argument("--format", choices=("csv", "json"), default="csv")
        p.add_argument("--verbose", "-v", action="count", default=0)
        if name == "ber-sweep":
            p.add_argument("--csi", choices=("perfect", "estimated", "both"), default=None)
    st = sub.add_parser("selftest", help="run the built-in invariant checks")
    st.add_argument("--verbose", "-v", action="count", default=0)
    return parser


def _setup_logging(verbosity: int):
    level = logging.WARNING if verbosity == 0 else logging.INFO if verbosity == 1 else logging.DEBUG
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)


def _config_from_args(args) -> SimConfig:
    cfg = load_config(args.config) if args.config else SimConfig()
    users = None
    if args.users:
        try:
            users = tuple(int(u) for u in args.users.split(","))
        except ValueError as exc:
            raise ConfigError(f"bad --users value {args.users!r}") from exc
    return cfg.with_overrides(seed=args.seed, trials=args.trials, users=users)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    _setup_logging(args.verbose)

    if args.command == "selftest":
        from .selftest import run_selftest

        return EXIT_OK if run_selftest(verbose=args.verbose > 0) else EXIT_RUNTIME

    try:
        cfg = _config_from_args(args)
        kwargs = {}
        if args.command == "ber-sweep" and args.csi:
            kwargs["csi"] = ("perfect", "estimated") if args.csi == "both" else args.csi
        result = SWEEPS[args.command](cfg, **kwargs)
    except ConfigError as exc:
        print(f"otfsmu: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (SweepError, ValueError, ArithmeticError, MemoryError) as exc:
        print(f"otfsmu: run failed: {exc}", file=sys.stderr)
        return EXIT_RUNTIME

    text = result.to_csv() if args.format == "csv" else result.to_json()
    if args.out:
        try:
            with open(args.out, "w", newline="") as fh:
                fh.write(text)
        except OSError as exc:
            print(f"otfsmu: cannot write {args.out}: {exc}", file=sys.stderr)
            return EXIT_RUNTIME
    else:
        sys.stdout.write(text)
    excluded = result.metadata.get("excluded_trials") or {}
    if excluded:
        logging.getLogger("otfsmu").warning("excluded trials: %s", excluded)
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
