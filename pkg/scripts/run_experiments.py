"""Run every shipped experiment config and write the CSVs under results/.

    python3 scripts/run_experiments.py [--workers 8] [--only tradeoff capacity_known]
"""

import argparse
import logging
import time
from dataclasses import replace
from pathlib import Path

from urllc_codesign.config import load_config
from urllc_codesign.experiments import run_capacity, run_sweep_horizon, run_tradeoff

ROOT = Path(__file__).resolve().parents[1]
RUNNERS = {"horizon": run_sweep_horizon, "d_max": run_tradeoff, "bandwidth": run_tradeoff, "n_devices": run_capacity}
CONFIGS = ["default", "tradeoff", "bandwidth", "capacity_worst_case", "capacity_known"]


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--workers", type=int, default=4)
    ap.add_argument("--only", nargs="+", choices=CONFIGS, default=CONFIGS)
    ap.add_argument("--out-dir", type=Path, default=ROOT / "results")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")

    for name in args.only:
        cfg = load_config(ROOT / "configs" / f"{name}.toml")
        out = args.out_dir / f"{name}.csv"
        t0 = time.perf_counter()
        rows = RUNNERS[cfg.sweep.variable](replace(cfg, output_path=out), workers=args.workers)
        print(f"{name:22s} {len(rows):5d} rows -> {out.relative_to(ROOT) if out.is_relative_to(ROOT) else out}"
              f"  ({time.perf_counter() - t0:.1f} s)")


if __name__ == "__main__":
    main()
