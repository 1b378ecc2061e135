"""Finite-difference gradient check of the full model under each
ablation mode. Exits nonzero if any parameter group fails.
"""

import argparse
import os
import sys

sys.path.insert(0, os.path.join(os.path.dirname(__file__), "..", "src"))

from molmodal.cli import main as cli_main


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--tolerance", type=float, default=1e-4)
    ap.add_argument("--max-entries", type=int, default=12)
    args = ap.parse_args()
    worst = 0
    for mode in ("LBL", "BOT", "ALL"):
        print(f"== mode {mode} ==")
        rc = cli_main([
            "gradcheck",
            "--set", f"ablation_mode={mode}",
            "--tolerance", str(args.tolerance),
            "--max-entries", str(args.max_entries),
        ])
        worst = max(worst, rc)
    return worst


if __name__ == "__main__":
    sys.exit(main())
