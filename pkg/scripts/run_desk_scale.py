"""Desk-scale regression experiment: 3 seeds, hidden 64, 50 epochs.

Uses data/esol.csv if present, otherwise generates the synthetic
surrogate regression set of the same size. Writes per-seed metrics and a
summary report under the output directory.
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from molmodal.cli import main as cli_main
from molmodal.synth import write_surrogate_regression_csv


def resolve_csv(data_dir: str) -> str:
    real = os.path.join(data_dir, "esol.csv")
    if os.path.exists(real):
        return real
    surrogate = os.path.join(data_dir, "surrogate_regression.csv")
    if not os.path.exists(surrogate):
        os.makedirs(data_dir, exist_ok=True)
        write_surrogate_regression_csv(surrogate)
        print(f"generated {surrogate}")
    return surrogate


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--data-dir", default="data")
    ap.add_argument("--out", default="out/desk_scale")
    ap.add_argument("--seeds", default="0,1,2")
    ap.add_argument("--epochs", type=int, default=50)
    args = ap.parse_args()
    csv = resolve_csv(args.data_dir)
    return cli_main([
        "train",
        "--out", args.out,
        "--seeds", args.seeds,
        "--set", f"dataset_path={csv}",
        "--set", "task_type=regression",
        "--set", f"epochs={args.epochs}",
        "--set", "hidden_dim=64",
    ])


if __name__ == "__main__":
    sys.exit(main())
