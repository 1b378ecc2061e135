"""Seed-controlled single runs and the LBL/BOT/ALL ablation ladder."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np

from .featurize import FeaturizedDataset, split_featurized
from .losses import ABLATION_MODES
from .model import MultiModalModel
from .training import EpochRecord, RunConfig, evaluate, train


@dataclass
class SeedResult:
    seed: int
    test_metric: float
    records: list[EpochRecord]
    model: MultiModalModel


def run_single_seed(cfg: RunConfig, fds: FeaturizedDataset, seed: int) -> SeedResult:
    """Split under the seed, train, and report the test metric of the
    best-validation model.
    """
    train_fds, val_fds, test_fds = split_featurized(fds, cfg.split_ratios, seed)
    model, records = train(cfg, train_fds, val_fds, seed)
    return SeedResult(
        seed=seed, test_metric=evaluate(model, test_fds), records=records, model=model
    )


def summarize(metrics: list[float]) -> dict:
    mean = float(np.mean(metrics))
    std = float(np.std(metrics))
    return {
        "metrics": metrics,
        "mean": mean,
        "std": std,
        "display": f"{mean:.3f}±{std:.3f}",
    }


def run_ablation(cfg_base: RunConfig, fds: FeaturizedDataset) -> dict:
    """Run LBL, BOT, ALL with identical seeds and splits per mode.

    Returns a report dict with per-mode per-seed metrics and mean/std in
    the three-column (LBL, BOT, ALL) layout.
    """
    report = {
        "dataset": fds.name,
        "task_type": fds.task_type,
        "metric": "roc_auc" if fds.task_type == "classification" else "rmse",
        "seeds": list(cfg_base.seeds),
        "modes": list(ABLATION_MODES),
        "per_mode": {},
    }
    for mode in ABLATION_MODES:
        cfg = dataclasses.replace(cfg_base, ablation_mode=mode)
        metrics = [run_single_seed(cfg, fds, seed).test_metric for seed in cfg.seeds]
        report["per_mode"][mode] = summarize(metrics)
    return report


def format_ablation_table(report: dict) -> str:
    header = f"{'Dataset':<16}" + "".join(f"{m:>16}" for m in report["modes"])
    row = f"{report['dataset']:<16}" + "".join(
        f"{report['per_mode'][m]['display']:>16}" for m in report["modes"]
    )
    note = f"metric={report['metric']}  seeds={report['seeds']} (identical across modes)"
    return "\n".join([header, row, note])
