"""Trend studies: loss ablation, dictionary-size sweep, gallery-size sweep."""

from __future__ import annotations

import csv
import os
from dataclasses import replace

import numpy as np

from .config import LOSS_MODES, RunConfig
from .evaluation import EVAL_CSV_COLUMNS, EvalReport, gallery_sweep
from .training import TrainResult, run_training

ABLATION_CSV = "ablation.csv"
DICTSWEEP_CSV = "dictsweep.csv"
SWEEP_CSV = "sweep.csv"


def _final_report(result: TrainResult) -> EvalReport:
    return result.eval_points[-1][1]


def run_ablation(cfg: RunConfig) -> dict[str, EvalReport]:
    """Train every loss mode with the same seed; one CSV row per mode."""
    reports: dict[str, EvalReport] = {}
    for mode in LOSS_MODES:
        cell = replace(cfg, loss_mode=mode,
                       output_dir=os.path.join(cfg.output_dir, f"ablate_{mode}"))
        reports[mode] = _final_report(run_training(cell))
    path = os.path.join(cfg.output_dir, ABLATION_CSV)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["loss_mode", *EVAL_CSV_COLUMNS])
        for mode in LOSS_MODES:
            writer.writerow([mode, *reports[mode].csv_row()])
    return reports


def run_dictionary_sweep(cfg: RunConfig) -> dict[tuple[str, int], EvalReport]:
    """Cross capacity multipliers with the pairing-only and joint losses."""
    modes = ("olp_only", "olp_hep")
    reports: dict[tuple[str, int], EvalReport] = {}
    for mode in modes:
        for multiplier in cfg.multipliers:
            cell = replace(
                cfg,
                loss_mode=mode,
                dictionary_capacity_multiplier=multiplier,
                output_dir=os.path.join(cfg.output_dir, f"dict_{mode}_{multiplier}x"),
            )
            reports[(mode, multiplier)] = _final_report(run_training(cell))
    path = os.path.join(cfg.output_dir, DICTSWEEP_CSV)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["loss_mode", "multiplier", "capacity", *EVAL_CSV_COLUMNS])
        for mode in modes:
            for multiplier in cfg.multipliers:
                capacity = multiplier * cfg.world.max_proposals_per_image
                writer.writerow(
                    [mode, multiplier, capacity, *reports[(mode, multiplier)].csv_row()]
                )
    return reports


def run_gallery_study(cfg: RunConfig, state=None) -> list[EvalReport]:
    """Evaluate nested galleries of each configured size on a trained model.

    Trains from scratch unless a TrainState (or config checkpoint) supplies
    parameters.
    """
    from .checkpoint import load_matrices, restore_network
    from .training import TrainState

    if state is None:
        if cfg.checkpoint:
            state = TrainState(cfg)
            restore_network(state.net, load_matrices(cfg.checkpoint), state.head)
        else:
            state = run_training(
                replace(cfg, output_dir=os.path.join(cfg.output_dir, "sweep_train"))
            ).state
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed).spawn(5)[4])
    reports = gallery_sweep(state.net, state.world, list(cfg.gallery_sizes), rng)
    os.makedirs(cfg.output_dir, exist_ok=True)
    with open(os.path.join(cfg.output_dir, SWEEP_CSV), "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(EVAL_CSV_COLUMNS)
        for report in reports:
            writer.writerow(report.csv_row())
    return reports
