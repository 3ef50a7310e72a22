"""Command-line entry point.

`robust-submod <suite> --config <file> [--out DIR] [--seed N] [--runs N]`
runs one experiment suite and writes its CSV artifacts;
`robust-submod verify [--quick]` runs the numerical property battery.

Exit codes: 0 success, 1 property violation or runtime failure,
2 configuration error.
"""

import argparse
import sys

from .errors import ConfigError, RobustSubmodError
from .experiments import SUITES, default_config, load_config, run_suite
from .verification import run_battery

_SUITE_HELP = {
    "satsel": "satellite sensing: robust vs saturation vs average-greedy selection",
    "swp": "preference-weighted saturation vs plain saturation",
    "online": "time-robust online selection vs per-step re-solving",
    "imgsum": "image summarization over embedding facility location",
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="robust-submod",
        description="Robust multi-task subset selection experiment runner.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for suite in SUITES:
        p = sub.add_parser(suite, help=_SUITE_HELP[suite])
        p.add_argument("--config", metavar="FILE",
                       help="JSON config file; built-in defaults when omitted")
        p.add_argument("--out", metavar="DIR", help="output directory override")
        p.add_argument("--seed", type=int, metavar="N", help="base seed override")
        p.add_argument("--runs", type=int, metavar="N", help="number of runs override")
    v = sub.add_parser("verify", help="run the numerical property battery")
    v.add_argument("--quick", action="store_true",
                   help="reduced instance counts for a fast smoke check")
    return parser


def _run_verify(quick: bool) -> int:
    failures = 0
    for check in run_battery(quick=quick):
        status = "PASS" if check.passed else "FAIL"
        print(f"{status} {check.name}: {check.detail}")
        failures += 0 if check.passed else 1
    if failures:
        print(f"{failures} check(s) failed", file=sys.stderr)
        return 1
    return 0


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "verify":
            return _run_verify(args.quick)
        config = load_config(args.config) if args.config else default_config(args.command)
        if config.suite != args.command:
            raise ConfigError(f"config declares suite {config.suite!r} but the "
                              f"{args.command!r} command was invoked")
        if args.out is not None:
            config.output_dir = args.out
        if args.seed is not None:
            config.seed = args.seed
        if args.runs is not None:
            config.runs = args.runs
        config.validate()
        result = run_suite(config)
        for path in result.paths:
            print(path)
        print(f"{config.suite}: {config.runs} run(s), {len(result.records)} records")
        return 0
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except RobustSubmodError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
