"""Command-line interface: featurize, train, eval, ablate, gradcheck, gates.

Configuration is a plain-text key=value file; precedence is defaults <
config file < --set overrides, with every transition logged. Unknown keys
are rejected.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import os
import sys

import numpy as np
import torch

from . import __version__
from .ablation import format_ablation_table, run_ablation, run_single_seed, summarize
from .chem.dataset import load_dataset
from .errors import ConfigError, MolmodalError
from .featurize import FeaturizedDataset, collate, featurize_dataset, load_cache, save_cache
from .gradcheck import MAX_ENTRIES_PER_TENSOR, gradient_check
from .model import ModelConfig, MultiModalModel
from .training import CONFIG_FIELD_NAMES, RunConfig, evaluate
from .synth import make_disentangle_dataset

logger = logging.getLogger("molmodal")

CHECKPOINT_FORMAT_VERSION = 1


def _parse_value(name: str, raw: str):
    """Convert a config string to the RunConfig field's type."""
    hints = {f.name: f.type for f in dataclasses.fields(RunConfig)}
    if name not in hints:
        raise ConfigError(f"unknown config key {name!r}")
    hint = str(hints[name])
    raw = raw.strip()
    if "bool" in hint:
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ConfigError(f"{name}: expected boolean, got {raw!r}")
    if "tuple[float" in hint:
        return tuple(float(x) for x in raw.split(","))
    if "tuple[int" in hint:
        return tuple(int(x) for x in raw.split(","))
    if "int" in hint:
        return None if raw.lower() == "none" else int(raw)
    if "float" in hint:
        return float(raw)
    return raw


def load_config(path: str | None, overrides: list[str], seeds: str | None = None) -> RunConfig:
    values: dict = {}
    if path:
        with open(path, encoding="utf-8") as fh:
            for lineno, line in enumerate(fh, 1):
                line = line.split("#", 1)[0].strip()
                if not line:
                    continue
                if "=" not in line:
                    raise ConfigError(f"{path}:{lineno}: expected key=value, got {line!r}")
                key, raw = (s.strip() for s in line.split("=", 1))
                values[key] = _parse_value(key, raw)
                logger.info("config file: %s = %r", key, values[key])
    for item in overrides or []:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, raw = (s.strip() for s in item.split("=", 1))
        values[key] = _parse_value(key, raw)
        logger.info("override: %s = %r", key, values[key])
    if seeds:
        values["seeds"] = tuple(int(s) for s in seeds.split(","))
        logger.info("override: seeds = %r", values["seeds"])
    unknown = set(values) - CONFIG_FIELD_NAMES
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return RunConfig(**values)


def resolve_dataset(cfg: RunConfig) -> FeaturizedDataset:
    path = cfg.dataset_path
    if not path:
        raise ConfigError("dataset_path not set")
    if path == "synthetic-disentangle":
        return featurize_dataset(
            make_disentangle_dataset(
                n=1200, seed=0, coord_jitter=0.5, obs_noise=1.0,
                label_frac=0.15, pad_atoms=("C", "O", "S", "Cl"),
                task_type=cfg.task_type,
            )
        )
    if not os.path.exists(path):
        raise ConfigError(f"dataset file not found: {path}")
    if path.endswith((".pkl", ".cache")):
        return load_cache(path)
    ds = load_dataset(
        path,
        task_type=cfg.task_type,
        smiles_column=cfg.smiles_column,
        conformer_seed=cfg.conformer_seed,
        name=cfg.dataset_name or None,
    )
    return featurize_dataset(ds)


def save_checkpoint(path, model: MultiModalModel, cfg: RunConfig, fds: FeaturizedDataset, seed: int):
    torch.save(
        {
            "format_version": CHECKPOINT_FORMAT_VERSION,
            "state_dict": model.state_dict(),
            "run_config": dataclasses.asdict(cfg),
            "model_config": dataclasses.asdict(model.cfg),
            "vocab_tokens": fds.vocab_tokens,
            "seed": seed,
        },
        path,
    )


def load_checkpoint(path) -> tuple[MultiModalModel, dict]:
    blob = torch.load(path, weights_only=False)
    if blob.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise ConfigError(f"unsupported checkpoint format {blob.get('format_version')}")
    model = MultiModalModel(ModelConfig(**blob["model_config"]))
    model.load_state_dict(blob["state_dict"])
    return model, blob


def _write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec.to_dict(), sort_keys=True) + "\n")


def cmd_featurize(args) -> int:
    ds = load_dataset(args.csv, task_type=args.task_type, smiles_column=args.smiles_column)
    fds = featurize_dataset(ds)
    os.makedirs(args.out, exist_ok=True)
    cache_path = os.path.join(args.out, f"{fds.name}.cache.pkl")
    save_cache(fds, cache_path)
    summary = {
        "dataset": fds.name,
        "parsed": len(fds),
        "skipped": len(ds.skipped),
        "n_tasks": fds.n_tasks,
        "task_type": fds.task_type,
        "vocab_size": fds.vocab_size,
        "cache": cache_path,
    }
    with open(os.path.join(args.out, "featurize_summary.json"), "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2, sort_keys=True)
    print(json.dumps(summary, indent=2, sort_keys=True))
    return 0


def cmd_train(args) -> int:
    cfg = load_config(args.config, args.set, args.seeds)
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seeds=(args.seed,))
    fds = resolve_dataset(cfg)
    os.makedirs(args.out, exist_ok=True)

    metrics = []
    for seed in cfg.seeds:
        result = run_single_seed(cfg, fds, seed)
        metrics.append(result.test_metric)
        _write_jsonl(os.path.join(args.out, f"metrics_seed{seed}.jsonl"), result.records)
        save_checkpoint(
            os.path.join(args.out, f"checkpoint_seed{seed}.pt"), result.model, cfg, fds, seed
        )
        logger.info("seed %d: test metric %.4f", seed, result.test_metric)

    report = {
        "dataset": fds.name,
        "task_type": fds.task_type,
        "metric": "roc_auc" if fds.task_type == "classification" else "rmse",
        "ablation_mode": cfg.ablation_mode,
        "seeds": list(cfg.seeds),
        "per_seed": dict(zip([str(s) for s in cfg.seeds], metrics)),
        **summarize(metrics),
        "config": dataclasses.asdict(cfg),
    }
    with open(os.path.join(args.out, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    lines = [f"{fds.name} ({report['metric']}, mode {cfg.ablation_mode})"]
    lines += [f"  seed {s}: {m:.4f}" for s, m in zip(cfg.seeds, metrics)]
    lines.append(f"  mean±std: {report['display']}")
    text = "\n".join(lines)
    with open(os.path.join(args.out, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(text + "\n")
    print(text)
    return 0


def cmd_eval(args) -> int:
    model, blob = load_checkpoint(args.checkpoint)
    cfg = RunConfig(**blob["run_config"])
    cfg = dataclasses.replace(cfg, dataset_path=args.dataset or cfg.dataset_path)
    fds = resolve_dataset(cfg)
    metric = evaluate(model, fds)
    out = {"dataset": fds.name, "metric": metric}
    print(json.dumps(out, indent=2, sort_keys=True))
    return 0


def cmd_ablate(args) -> int:
    cfg = load_config(args.config, args.set, args.seeds)
    fds = resolve_dataset(cfg)
    os.makedirs(args.out, exist_ok=True)
    report = run_ablation(cfg, fds)
    report["config"] = dataclasses.asdict(cfg)
    with open(os.path.join(args.out, "report.json"), "w", encoding="utf-8") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    table = format_ablation_table(report)
    with open(os.path.join(args.out, "report.txt"), "w", encoding="utf-8") as fh:
        fh.write(table + "\n")
    print(table)
    return 0


def cmd_gradcheck(args) -> int:
    overrides = ["hidden_dim=8", "d_shared=4", "d_private=4", "dropout=0.0"]
    cfg = load_config(args.config, overrides + (args.set or []))
    fds = featurize_dataset(make_disentangle_dataset(n=8, seed=0, task_type=cfg.task_type))
    torch.manual_seed(cfg.seeds[0])
    model = MultiModalModel(cfg.model_config(fds.vocab_size, fds.n_tasks))
    batch = collate(fds.molecules[:2], pad_id=fds.vocab_size)
    report = gradient_check(
        model,
        batch,
        tolerance=args.tolerance,
        mode=cfg.ablation_mode,
        noise_seed=cfg.seeds[0],
        max_entries=args.max_entries,
    )
    for line in report.lines():
        print(line)
    print(f"{'PASS' if report.passed else 'FAIL'} (tolerance {report.tolerance:g})")
    return 0 if report.passed else 1


def cmd_gates(args) -> int:
    model, blob = load_checkpoint(args.checkpoint)
    cfg = RunConfig(**blob["run_config"])
    cfg = dataclasses.replace(cfg, dataset_path=args.dataset or cfg.dataset_path)
    fds = resolve_dataset(cfg)
    model.eval()
    weights = []
    with torch.no_grad():
        for i in range(0, len(fds), 256):
            batch = collate(fds.molecules[i : i + 256], pad_id=model.cfg.vocab_size)
            result = model(batch, generator=None, sample=False)
            weights.append(result.gate.weights.numpy())
    gates = np.concatenate(weights).tolist()
    os.makedirs(args.out, exist_ok=True)
    path = os.path.join(args.out, "gates.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump({"dataset": fds.name, "modalities": ["sequence", "graph", "geometry"], "gates": gates}, fh)
    print(f"wrote {len(gates)} gate vectors to {path}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="molmodal", description="Multi-modal molecular property prediction")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--config", default=None, help="key=value config file")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE")
        sp.add_argument("--out", default="out", help="output directory")
        sp.add_argument("--seed", type=int, default=None)
        sp.add_argument("--seeds", default=None, help="comma-separated seed list")

    sp = sub.add_parser("featurize", help="parse a CSV and write a featurized cache")
    sp.add_argument("csv")
    sp.add_argument("--smiles-column", default="smiles")
    sp.add_argument("--task-type", default="regression", choices=["classification", "regression"])
    sp.add_argument("--out", default="out")
    sp.set_defaults(func=cmd_featurize)

    sp = sub.add_parser("train", help="train over the configured seeds")
    common(sp)
    sp.set_defaults(func=cmd_train)

    sp = sub.add_parser("eval", help="evaluate a checkpoint")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--dataset", default=None)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("ablate", help="run the LBL/BOT/ALL ladder")
    common(sp)
    sp.set_defaults(func=cmd_ablate)

    sp = sub.add_parser("gradcheck", help="finite-difference gradient check")
    common(sp)
    sp.add_argument("--tolerance", type=float, default=1e-4)
    sp.add_argument("--max-entries", type=int, default=MAX_ENTRIES_PER_TENSOR)
    sp.set_defaults(func=cmd_gradcheck)

    sp = sub.add_parser("gates", help="export per-molecule gate weights")
    sp.add_argument("--checkpoint", required=True)
    sp.add_argument("--dataset", default=None)
    sp.add_argument("--out", default="out")
    sp.set_defaults(func=cmd_gates)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except MolmodalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
