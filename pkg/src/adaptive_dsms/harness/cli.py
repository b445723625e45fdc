"""Command-line entry point: ``adaptive-dsms run|compare|validate``.

Exit codes: 0 success, 1 config error, 2 workload error, 3 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys

from .config import ConfigError, load_config, validate_config
from .experiment import InvalidComparisonError, WorkloadError, compare, run_experiment

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_WORKLOAD = 2
EXIT_RUNTIME = 3


def _add_overrides(p: argparse.ArgumentParser) -> None:
    p.add_argument("--seed", type=int, help="override the config's seed")
    p.add_argument("--out-dir", help="directory for CSV output (overrides output_dir)")
    p.add_argument("--duration-ms", type=float, help="override the run length in milliseconds")
    p.add_argument("--mode", choices=("virtual", "realtime"), help="override the execution mode")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="adaptive-dsms",
        description="Stream engine with learning-automaton parameter tuning.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run one experiment and write metrics/params/probs CSVs")
    run.add_argument("config", help="YAML config path or shipped config name (e.g. default)")
    _add_overrides(run)

    cmp = sub.add_parser("compare", help="run a baseline and a learning config and compare them")
    cmp.add_argument("baseline", help="config without learning")
    cmp.add_argument("learning", help="config with learning")
    _add_overrides(cmp)

    val = sub.add_parser("validate", help="check a config without running it")
    val.add_argument("config")
    return parser


def _load(path: str, args: argparse.Namespace):
    cfg = load_config(path)
    return cfg.with_overrides(seed=args.seed, duration_ms=args.duration_ms, mode=args.mode, output_dir=args.out_dir)


def _cmd_run(args: argparse.Namespace) -> int:
    cfg = _load(args.config, args)
    report = run_experiment(cfg)
    print(json.dumps(report.summary(), indent=2, sort_keys=True))
    return EXIT_OK


def _cmd_compare(args: argparse.Namespace) -> int:
    base = _load(args.baseline, args)
    learn = _load(args.learning, args)
    result = compare(base, learn, args.out_dir or base.output_dir)
    print(result.table())
    return EXIT_OK


def _cmd_validate(args: argparse.Namespace) -> int:
    diags = validate_config(args.config)
    if not diags:
        print("OK")
        return EXIT_OK
    for d in diags:
        print(d)
    return EXIT_CONFIG


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    handler = {"run": _cmd_run, "compare": _cmd_compare, "validate": _cmd_validate}[args.command]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except InvalidComparisonError as exc:
        print(f"invalid comparison: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except WorkloadError as exc:
        print(f"workload error: {exc}", file=sys.stderr)
        return EXIT_WORKLOAD
    except Exception as exc:  # noqa: BLE001
        logging.getLogger(__name__).debug("run failed", exc_info=True)
        print(f"runtime failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
