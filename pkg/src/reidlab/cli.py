"""Command-line front end.

Every subcommand takes --config (flat JSON), --seed, and --out. Exit codes:
0 success, 1 configuration error, 2 numerical failure, 3 gradient-check
threshold failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .checkpoint import load_matrices, restore_network
from .config import config_from_flat
from .errors import ConfigError, NumericalFailureError, ReidlabError
from .evaluation import write_eval_csv
from .studies import run_ablation, run_dictionary_sweep, run_gallery_study
from .training import TrainState, evaluate_state, run_training
from .verification import GRADIENT_TOLERANCE, run_all_suites

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERICAL = 2
EXIT_THRESHOLD = 3


def _load_config(args) -> "RunConfig":
    flat = {}
    if args.config:
        with open(args.config) as fh:
            flat = json.load(fh)
        if not isinstance(flat, dict):
            raise ConfigError("config: top-level JSON value must be an object")
    return config_from_flat(flat, seed=args.seed, output_dir=args.out)


def cmd_train(args) -> int:
    cfg = _load_config(args)
    if args.resume and not os.path.exists(args.resume):
        raise ConfigError(f"resume: checkpoint {args.resume!r} not found")
    result = run_training(cfg, resume_from=args.resume or None)
    final = result.eval_points[-1][1]
    print(
        f"trained {cfg.total_iterations} iterations ({cfg.loss_mode}); "
        f"top1={final.cmc[1]:.4f} map={final.mAP:.4f}; "
        f"checkpoint at {result.checkpoint_path}"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    cfg = _load_config(args)
    if not cfg.checkpoint:
        raise ConfigError("checkpoint: required for the eval command")
    if not os.path.exists(cfg.checkpoint):
        raise ConfigError(f"checkpoint: {cfg.checkpoint!r} not found")
    state = TrainState(cfg)
    restore_network(state.net, load_matrices(cfg.checkpoint), state.head)
    from .simulator import build_eval_split

    queries, gallery = build_eval_split(state.world, cfg.gallery_size, state.eval_rng)
    report = evaluate_state(state, queries, gallery)
    os.makedirs(cfg.output_dir, exist_ok=True)
    write_eval_csv(os.path.join(cfg.output_dir, "eval.csv"), [report])
    print(
        f"evaluated {report.num_queries} queries against gallery "
        f"{report.gallery_size}: top1={report.cmc[1]:.4f} map={report.mAP:.4f}"
    )
    return EXIT_OK


def cmd_gradcheck(args) -> int:
    results = run_all_suites(seed=args.seed)
    worst_name = max(results, key=results.get)
    for name, err in results.items():
        status = "ok" if err < GRADIENT_TOLERANCE else "FAIL"
        print(f"{name}: max relative error {err:.3e} [{status}]")
    if results[worst_name] >= GRADIENT_TOLERANCE:
        print(f"gradient check failed: {worst_name} at {results[worst_name]:.3e}")
        return EXIT_THRESHOLD
    return EXIT_OK


def cmd_ablate(args) -> int:
    cfg = _load_config(args)
    reports = run_ablation(cfg)
    for mode, report in reports.items():
        print(f"{mode}: top1={report.cmc[1]:.4f} map={report.mAP:.4f}")
    return EXIT_OK


def cmd_dictsweep(args) -> int:
    cfg = _load_config(args)
    reports = run_dictionary_sweep(cfg)
    for (mode, multiplier), report in reports.items():
        print(f"{mode} x{multiplier}: top1={report.cmc[1]:.4f} map={report.mAP:.4f}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load_config(args)
    reports = run_gallery_study(cfg)
    for report in reports:
        print(
            f"gallery {report.gallery_size}: top1={report.cmc[1]:.4f} "
            f"map={report.mAP:.4f}"
        )
    return EXIT_OK


_COMMANDS = {
    "train": cmd_train,
    "eval": cmd_eval,
    "gradcheck": cmd_gradcheck,
    "ablate": cmd_ablate,
    "dictsweep": cmd_dictsweep,
    "sweep": cmd_sweep,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="reidlab",
        description="Siamese metric-learning lab over a simulated proposal stream",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    for name in _COMMANDS:
        cmd = sub.add_parser(name)
        cmd.add_argument("--config", default=None, help="flat JSON config file")
        cmd.add_argument("--seed", type=int, required=True, help="run seed")
        cmd.add_argument("--out", default=".", help="output directory")
        if name == "train":
            cmd.add_argument("--resume", default=None,
                             help="checkpoint to restore before training")
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except NumericalFailureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ReidlabError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
