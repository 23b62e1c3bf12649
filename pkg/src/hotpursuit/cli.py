"""Command-line front end for the pipeline stages.

Each subcommand runs one stage against an output directory; ``all`` chains
the six stages. Config values come from an optional TOML/JSON file and are
overridden by flags.
"""

from __future__ import annotations

import argparse
import sys

from .pipeline import (STAGES, PipelineConfig, PipelineError, run_all,
                       run_stage)
from .world import GAME_TYPES

_FLAG_FIELDS = [
    ("--episodes", "episodes_per_type", int,
     "episodes per game type in the simulate stage"),
    ("--population", "population_size", int, "NSGA-II population size"),
    ("--generations", "generations", int, "NSGA-II generations"),
    ("--batch-size", "batch_size", int, "training batch size"),
    ("--learning-rate", "learning_rate", float, "Adam learning rate"),
    ("--weight-decay", "weight_decay", float, "decoupled weight decay"),
    ("--epochs", "epochs", int, "training epochs"),
    ("--count", "generate_count", int, "hot starts per game type"),
    ("--eval-batches", "eval_batches", int, "evaluation batches"),
    ("--eval-batch-size", "eval_batch_size", int, "episodes per batch"),
    ("--capture-radius", "capture_radius", float, "capture radius"),
    ("--dt", "dt", float, "integration step"),
    ("--horizon", "horizon", int, "episode length in steps"),
    ("--grid-resolution", "grid_resolution", int, "value grid resolution"),
    ("--alpha", "control_alpha", float, "geometric/gradient blend weight"),
    ("--workers", "workers", int, "episode worker processes"),
]


def build_parser():
    parser = argparse.ArgumentParser(
        prog="hotpursuit",
        description="Pursuit-evasion hot-start pipeline")
    sub = parser.add_subparsers(dest="stage", required=True)
    for stage in list(STAGES) + ["all"]:
        p = sub.add_parser(stage, help=f"run the {stage} stage")
        p.add_argument("--config", help="TOML/JSON pipeline config file")
        p.add_argument("--out", help="output directory")
        p.add_argument("--seed", type=int, help="master seed")
        p.add_argument("--game-type", action="append", dest="game_types",
                       choices=GAME_TYPES, metavar="PxE",
                       help="restrict to a game type (repeatable)")
        for flag, _, cast, help_text in _FLAG_FIELDS:
            p.add_argument(flag, type=cast, help=help_text)
    return parser


def config_from_args(args):
    if args.config:
        config = PipelineConfig.from_file(args.config)
    else:
        config = PipelineConfig()
    data = config.to_dict()
    if args.out is not None:
        data["out_dir"] = args.out
    if args.seed is not None:
        data["master_seed"] = args.seed
    if args.game_types:
        data["game_types"] = args.game_types
    for flag, name, _, _ in _FLAG_FIELDS:
        value = getattr(args, flag.lstrip("-").replace("-", "_"))
        if value is not None:
            data[name] = value
    return PipelineConfig.from_dict(data)


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
        if args.stage == "all":
            run_all(config)
        else:
            run_stage(config, args.stage)
    except PipelineError as err:
        print(f"error: {err}", file=sys.stderr)
        return 2
    print(f"{args.stage}: done -> {config.out_dir}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
