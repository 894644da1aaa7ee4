"""Command line entry point with three verbs: train, eval, selftest.

Exit codes: 0 success, 2 usage/configuration error, 3 runtime abort.
"""

from __future__ import annotations

import argparse
import sys

from .config import build_config, read_config_file
from .errors import ConfigError, D4PGError, UsageError
from .experiment import run_eval, run_train
from .selftest import run_selftest

# maps CLI destination names to config keys; only flags the user actually
# passed become overrides, so file values survive unless shadowed
_FLAG_KEYS = (
    "env", "head", "prioritized", "nstep", "actors", "atoms", "vmin", "vmax",
    "gamma", "actor_lr", "critic_lr", "batch", "replay", "epsilon", "seed",
    "steps", "eval_every", "deterministic", "out",
)


def _add_common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", metavar="PATH", help="flat key = value config file")
    parser.add_argument("--env", metavar="NAME")
    parser.add_argument("--head", choices=("categorical", "mog", "scalar"))
    parser.add_argument("--prioritized", choices=("true", "false"))
    parser.add_argument("--nstep", type=int, metavar="N")
    parser.add_argument("--actors", type=int, metavar="K")
    parser.add_argument("--atoms", type=int, metavar="L")
    parser.add_argument("--vmin", type=float, metavar="X")
    parser.add_argument("--vmax", type=float, metavar="X")
    parser.add_argument("--gamma", type=float, metavar="G")
    parser.add_argument("--actor-lr", dest="actor_lr", type=float, metavar="A")
    parser.add_argument("--critic-lr", dest="critic_lr", type=float, metavar="B")
    parser.add_argument("--batch", type=int, metavar="M")
    parser.add_argument("--replay", type=int, metavar="R")
    parser.add_argument("--epsilon", type=float, metavar="E")
    parser.add_argument("--seed", type=int, metavar="S")
    parser.add_argument("--steps", type=int, metavar="T")
    parser.add_argument("--eval-every", dest="eval_every", type=int, metavar="E")
    parser.add_argument("--deterministic", action="store_true", default=None)
    parser.add_argument("--out", metavar="DIR")


def _config_from_args(args) -> "ExperimentConfig":
    file_values = read_config_file(args.config) if args.config else {}
    overrides = {}
    for key in _FLAG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    return build_config(file_values, overrides)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="d4pg")
    verbs = parser.add_subparsers(dest="verb", required=True)

    train = verbs.add_parser("train", help="run a training experiment")
    _add_common_flags(train)
    train.add_argument("--resume", metavar="CKPT", help="checkpoint to resume from")
    train.add_argument("--force", action="store_true",
                       help="resume even if the checkpoint config hash mismatches")

    ev = verbs.add_parser("eval", help="evaluate a checkpointed policy without noise")
    ev.add_argument("checkpoint", metavar="CKPT")
    _add_common_flags(ev)

    verbs.add_parser("selftest", help="run the quick oracle/property suite")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.verb == "train":
            cfg = _config_from_args(args)
            return run_train(cfg, resume_path=args.resume, force=args.force)
        if args.verb == "eval":
            cfg = _config_from_args(args)
            report = run_eval(cfg, args.checkpoint)
            print(f"episodes: {report['episodes']}")
            print(f"return mean: {report['mean']:.4f}  std: {report['std']:.4f}")
            print(f"return min:  {report['min']:.4f}  max: {report['max']:.4f}")
            print(f"checkpoint learner steps: {report['learner_steps']}")
            return 0
        return 0 if run_selftest() else 3
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except D4PGError as exc:
        print(f"abort: {exc}", file=sys.stderr)
        return 3


if __name__ == "__main__":
    sys.exit(main())
