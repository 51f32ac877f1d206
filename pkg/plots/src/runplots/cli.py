"""Command line front ends for the two figure styles.

Exit codes match the training harness: 0 success, 1 usage or data errors,
2 runtime failures.
"""

from __future__ import annotations

import argparse
import glob
import sys

from .bands import RunSet, plot_dkl, plot_returns


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(message)


def _build_parser(prog: str, description: str, log_flag: bool) -> _Parser:
    p = _Parser(prog=prog, description=description)
    p.add_argument("--label", action="append", required=True, metavar="NAME=GLOB",
                   help="series label and a glob of metrics CSVs (repeatable)")
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--smooth", type=int, default=1,
                   help="trailing moving-average window in bins (1 = off)")
    if log_flag:
        p.add_argument("--log-y", action="store_true", help="logarithmic y axis")
    return p


def _runset(args) -> RunSet:
    labels = {}
    for spec in args.label:
        if "=" not in spec:
            raise _UsageError(f"--label wants NAME=GLOB, got {spec!r}")
        name, pattern = spec.split("=", 1)
        labels[name] = sorted(glob.glob(pattern))
    return RunSet(labels=labels, out=args.out, smooth=args.smooth,
                  log_y=getattr(args, "log_y", False))


def _run(parser: _Parser, plot, argv) -> int:
    try:
        args = parser.parse_args(argv)
        path = plot(_runset(args))
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(path)
    return 0


def main_returns(argv=None) -> int:
    parser = _build_parser("plot-returns",
                           "Mean-return curves with 20-80 percentile bands across seeds",
                           log_flag=False)
    return _run(parser, plot_returns, argv)


def main_dkl(argv=None) -> int:
    parser = _build_parser("plot-dkl",
                           "Average divergence traces between replay and the current policy",
                           log_flag=True)
    return _run(parser, plot_dkl, argv)


if __name__ == "__main__":
    sys.exit(main_returns())
