"""Training loop, learning-rate schedule, and evaluation metrics."""

from __future__ import annotations

import copy
import math
import time
from dataclasses import dataclass, fields

import numpy as np
import torch

from .errors import ConfigError, DegenerateTask, EmptyMask, NumericalError
from .featurize import FeaturizedDataset, collate
from .losses import ABLATION_MODES, LossBreakdown
from .model import ModelConfig, MultiModalModel

DEFAULT_SEEDS = tuple(range(10))


@dataclass
class RunConfig:
    """Every experimental knob in one place; the single source of truth."""

    dataset_path: str = ""
    dataset_name: str = ""
    smiles_column: str = "smiles"
    task_type: str = "regression"
    epochs: int = 200
    batch_size: int = 64
    hidden_dim: int = 256
    d_shared: int | None = None
    d_private: int | None = None
    split_ratios: tuple[float, float, float] = (0.8, 0.1, 0.1)
    seeds: tuple[int, ...] = DEFAULT_SEEDS
    lr_init: float = 1e-3
    lr_max: float = 2e-3
    lr_final: float = 1e-3
    warmup_steps: int | None = None  # default: two epochs' worth of steps
    decay_steps: int | None = None  # default: remaining steps after warmup
    clip_norm: float = 5.0
    ablation_mode: str = "ALL"
    deterministic_inference: bool = True
    message_passing_steps: int = 3
    n_attention_heads: int = 2
    n_transformer_layers: int = 2
    dropout: float = 0.1
    temperature: float = 0.1
    conformer_seed: int = 0

    def __post_init__(self):
        self.validate()

    def validate(self):
        for name in ("epochs", "batch_size", "hidden_dim", "message_passing_steps"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        if abs(sum(self.split_ratios) - 1.0) > 1e-9 or any(r <= 0 for r in self.split_ratios):
            raise ConfigError(f"split_ratios must be positive and sum to 1, got {self.split_ratios}")
        if self.lr_final > self.lr_max or self.lr_init > self.lr_max:
            raise ConfigError(
                f"lr_max ({self.lr_max}) must dominate lr_init ({self.lr_init}) "
                f"and lr_final ({self.lr_final})"
            )
        if self.ablation_mode not in ABLATION_MODES:
            raise ConfigError(f"ablation_mode must be one of {ABLATION_MODES}")
        if not self.seeds:
            raise ConfigError("at least one seed required")

    def model_config(self, vocab_size: int, n_tasks: int) -> ModelConfig:
        return ModelConfig(
            vocab_size=vocab_size,
            n_tasks=n_tasks,
            task_type=self.task_type,
            hidden_dim=self.hidden_dim,
            d_shared=self.d_shared,
            d_private=self.d_private,
            message_passing_steps=self.message_passing_steps,
            n_attention_heads=self.n_attention_heads,
            n_transformer_layers=self.n_transformer_layers,
            dropout=self.dropout,
            temperature=self.temperature,
        )


CONFIG_FIELD_NAMES = {f.name for f in fields(RunConfig)}


@dataclass
class EpochRecord:
    epoch: int
    train_loss: LossBreakdown
    val_metric: float
    lr: float
    wall_time: float

    def to_dict(self) -> dict:
        return {
            "epoch": self.epoch,
            "train_loss": self.train_loss.to_dict(),
            "val_metric": self.val_metric,
            "lr": self.lr,
            "wall_time": self.wall_time,
        }


def noam_lr(step: int, cfg: RunConfig, warmup: int | None = None, decay: int | None = None) -> float:
    """Linear ramp lr_init -> lr_max over warmup steps, then geometric decay
    to lr_final over the decay horizon; continuous at the boundary and
    never below lr_final.
    """
    if step < 1:
        raise ConfigError(f"step must be >= 1, got {step}")
    warmup = warmup if warmup is not None else (cfg.warmup_steps or 1)
    decay = decay if decay is not None else (cfg.decay_steps or 1)
    warmup = max(1, warmup)
    decay = max(1, decay)
    if step <= warmup:
        if warmup == 1:
            return cfg.lr_max if step >= warmup else cfg.lr_init
        frac = (step - 1) / (warmup - 1)
        return cfg.lr_init + frac * (cfg.lr_max - cfg.lr_init)
    if cfg.lr_final <= 0 or cfg.lr_max <= 0:
        raise ConfigError("learning rates must be positive")
    frac = (step - warmup) / decay
    lr = cfg.lr_max * (cfg.lr_final / cfg.lr_max) ** frac
    return max(lr, cfg.lr_final)


def _minibatch_indices(n: int, batch_size: int, rng: np.random.Generator) -> list[np.ndarray]:
    """Shuffled minibatches; a trailing singleton is folded into the previous
    batch so batch-size-dependent losses always see at least two samples.
    """
    perm = rng.permutation(n)
    chunks = [perm[i : i + batch_size] for i in range(0, n, batch_size)]
    if len(chunks) > 1 and len(chunks[-1]) == 1:
        chunks[-2] = np.concatenate([chunks[-2], chunks[-1]])
        chunks.pop()
    return chunks


def rmse(y_hat: np.ndarray, y: np.ndarray, mask: np.ndarray) -> float:
    mask = np.asarray(mask, dtype=bool)
    if not mask.any():
        raise EmptyMask("no valid entries for RMSE")
    err = np.asarray(y_hat)[mask] - np.asarray(y)[mask]
    return float(np.sqrt((err**2).mean()))


def roc_auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Pairwise concordance probability with ties counted 0.5 (rank form)."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = labels > 0.5
    n_pos, n_neg = int(pos.sum()), int((~pos).sum())
    if n_pos == 0 or n_neg == 0:
        raise DegenerateTask("roc_auc needs both classes present")
    order = np.argsort(scores, kind="mergesort")
    ranks = np.empty(len(scores), dtype=np.float64)
    sorted_scores = scores[order]
    i = 0
    rank = 1.0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        avg = (rank + rank + (j - i)) / 2.0
        ranks[order[i : j + 1]] = avg
        rank += j - i + 1
        i = j + 1
    return float((ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def predict_dataset(
    model: MultiModalModel, fds: FeaturizedDataset, batch_size: int = 256
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Deterministic-inference predictions: (scores_or_values, labels, mask)."""
    model.eval()
    preds = []
    with torch.no_grad():
        for i in range(0, len(fds), batch_size):
            batch = collate(fds.molecules[i : i + batch_size], pad_id=model.cfg.vocab_size)
            result = model(batch, generator=None, sample=False)
            preds.append(result.predictions.numpy())
    model.train()
    y_hat = np.concatenate(preds)
    labels = np.stack([m.labels for m in fds.molecules])
    mask = np.stack([m.label_mask for m in fds.molecules])
    return y_hat, labels, mask


def evaluate(model: MultiModalModel, fds: FeaturizedDataset) -> float:
    """Mean per-task ROC-AUC (classification, on sigmoid scores) or masked
    RMSE (regression). Degenerate classification tasks are skipped.
    """
    y_hat, labels, mask = predict_dataset(model, fds)
    if fds.task_type == "regression":
        return rmse(y_hat, labels, mask)
    aucs = []
    for t in range(fds.n_tasks):
        valid = mask[:, t]
        if not valid.any():
            continue
        scores = 1.0 / (1.0 + np.exp(-y_hat[valid, t]))
        try:
            aucs.append(roc_auc(scores, labels[valid, t]))
        except DegenerateTask:
            continue
    if not aucs:
        raise DegenerateTask("every task is degenerate on this split")
    return float(np.mean(aucs))


def metric_is_better(task_type: str, a: float, b: float) -> bool:
    """True if metric a beats metric b (higher AUC, lower RMSE)."""
    return a > b if task_type == "classification" else a < b


def train(
    cfg: RunConfig,
    train_fds: FeaturizedDataset,
    val_fds: FeaturizedDataset | None,
    seed: int,
) -> tuple[MultiModalModel, list[EpochRecord]]:
    """Train one model under (cfg, seed); deterministic per (cfg, seed).

    Returns the model restored to its best-validation parameters plus the
    per-epoch records.
    """
    torch.set_num_threads(1)
    torch.manual_seed(seed)
    model = MultiModalModel(cfg.model_config(train_fds.vocab_size, train_fds.n_tasks))
    optimizer = torch.optim.Adam(model.parameters(), lr=cfg.lr_init)
    noise_gen = torch.Generator().manual_seed(seed + 1)
    data_rng = np.random.default_rng(seed + 2)

    n = len(train_fds)
    steps_per_epoch = max(1, math.ceil(n / cfg.batch_size))
    warmup = cfg.warmup_steps if cfg.warmup_steps is not None else 2 * steps_per_epoch
    decay = (
        cfg.decay_steps
        if cfg.decay_steps is not None
        else max(1, cfg.epochs * steps_per_epoch - warmup)
    )

    records: list[EpochRecord] = []
    best_state = copy.deepcopy(model.state_dict())
    best_metric: float | None = None
    step = 0
    for epoch in range(cfg.epochs):
        t0 = time.monotonic()
        last_breakdown: LossBreakdown | None = None
        for idx in _minibatch_indices(n, cfg.batch_size, data_rng):
            batch = collate([train_fds.molecules[i] for i in idx], pad_id=train_fds.vocab_size)
            step += 1
            lr = noam_lr(step, cfg, warmup=warmup, decay=decay)
            for group in optimizer.param_groups:
                group["lr"] = lr
            optimizer.zero_grad()
            if not bool(batch.label_mask.any()):
                # a fully unlabeled minibatch carries no supervised signal
                continue
            total, breakdown, _ = model.compute_loss(
                batch, generator=noise_gen, sample=True, mode=cfg.ablation_mode
            )
            if not math.isfinite(breakdown.total):
                bad = [
                    name
                    for name, v in breakdown.to_dict().items()
                    if isinstance(v, float) and not math.isfinite(v)
                ]
                raise NumericalError(f"non-finite loss at epoch {epoch}: {bad}")
            total.backward()
            torch.nn.utils.clip_grad_norm_(model.parameters(), cfg.clip_norm)
            optimizer.step()
            last_breakdown = breakdown

        val_metric = evaluate(model, val_fds) if val_fds is not None else float("nan")
        records.append(
            EpochRecord(
                epoch=epoch,
                train_loss=last_breakdown,
                val_metric=val_metric,
                lr=lr,
                wall_time=time.monotonic() - t0,
            )
        )
        if val_fds is not None and (
            best_metric is None or metric_is_better(cfg.task_type, val_metric, best_metric)
        ):
            best_metric = val_metric
            best_state = copy.deepcopy(model.state_dict())

    if val_fds is not None:
        model.load_state_dict(best_state)
    return model, records
