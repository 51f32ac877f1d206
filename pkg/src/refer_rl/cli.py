"""Command line entry points: train, evaluate, inspect.

Exit codes: 0 success, 1 usage error (bad flags or invalid configuration),
2 runtime failure.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .checkpoint import describe_checkpoint, load_checkpoint
from .config import build_config
from .training import CHECKPOINT_NAME, Trainer, evaluate_checkpoint


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on bad flags; the contract wants usage errors on 1
    def error(self, message):
        raise _UsageError(message)


def _build_parser() -> _Parser:
    parser = _Parser(prog="refer-rl", description="Off-policy continuous-control training harness")
    sub = parser.add_subparsers(dest="command", required=True)

    tr = sub.add_parser("train", help="run a training job")
    tr.add_argument("--algo", choices=("vracer", "ddpg", "naf"))
    tr.add_argument("--replay", choices=("refer", "refer1", "refer2", "er", "per"))
    tr.add_argument("--env")
    tr.add_argument("--steps", type=int, help="total environment steps")
    tr.add_argument("--seed", type=int)
    tr.add_argument("--workers", type=int)
    tr.add_argument("--config", type=Path, help="key=value file overriding defaults")
    tr.add_argument("--out", type=Path, default=Path("."), help="output directory")
    tr.add_argument("--resume", action="store_true", help="continue from the out dir's checkpoint")

    ev = sub.add_parser("evaluate", help="play the deterministic policy from a checkpoint")
    ev.add_argument("--ckpt", type=Path, required=True)
    ev.add_argument("--episodes", type=int, default=20)
    ev.add_argument("--seed", type=int, default=0)
    ev.add_argument("--env", help="must match the checkpoint's environment")

    ins = sub.add_parser("inspect", help="print a checkpoint's header")
    ins.add_argument("--ckpt", type=Path, required=True)
    return parser


def _cmd_train(args) -> int:
    overrides = {
        "algo": args.algo,
        "replay": args.replay,
        "env": args.env,
        "total_steps": args.steps,
        "seed": args.seed,
        "workers": args.workers,
    }
    cfg = build_config(file_path=args.config, cli_overrides=overrides)
    trainer = Trainer(cfg, args.out)
    path = trainer.run(resume=args.resume)
    print(f"done: t={trainer.t} k={trainer.k} beta={trainer.beta:.4f}")
    print(f"metrics: {trainer.metrics.path}")
    print(f"checkpoint: {path}")
    return 0


def _cmd_evaluate(args) -> int:
    if args.episodes < 1:
        raise _UsageError("--episodes must be >= 1")
    mean, returns = evaluate_checkpoint(args.ckpt, args.episodes, args.seed, env_name=args.env)
    for i, r in enumerate(returns):
        print(f"episode {i}: {r:.3f}")
    print(f"mean return over {len(returns)} episodes: {mean:.3f}")
    return 0


def _cmd_inspect(args) -> int:
    header, _ = load_checkpoint(args.ckpt)
    print(describe_checkpoint(header))
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        parser.print_usage(sys.stderr)
        return 1
    try:
        if args.command == "train":
            return _cmd_train(args)
        if args.command == "evaluate":
            return _cmd_evaluate(args)
        return _cmd_inspect(args)
    except _UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (ValueError, TypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (OSError, RuntimeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
