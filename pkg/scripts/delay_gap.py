"""Delay bound at which co-design and the no-prediction baseline first meet
the reliability target, and the difference between the two.

    python3 scripts/delay_gap.py [--step-ms 0.1] [--bandwidth-khz 440]
"""

import argparse
import math
from dataclasses import replace

from urllc_codesign.config import default_config
from urllc_codesign.experiments import run_tradeoff


def first_meeting(rows, scheme, target):
    for r in rows:
        if r.scheme == scheme and r.status == "ok" and r.eps_overall <= target:
            return r.sweep_value
    return math.nan


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--step-ms", type=float, default=0.1)
    ap.add_argument("--stop-ms", type=float, default=60.0)
    ap.add_argument("--bandwidth-khz", type=float, default=440.0)
    ap.add_argument("--workers", type=int, default=4)
    args = ap.parse_args()

    cfg = default_config(variable="d_max", start=0.0, stop=args.stop_ms, step=args.step_ms)
    link = replace(cfg.scenario.link, bandwidth=args.bandwidth_khz * 1e3)
    cfg = replace(cfg, scenario=cfg.scenario.replace(link=link))
    rows = run_tradeoff(cfg, workers=args.workers)
    target = cfg.scenario.reliability_target
    ours = first_meeting(rows, "codesign", target)
    base = first_meeting(rows, "no_prediction", target)
    print(f"co-design meets {target:g} from D_max = {ours:g} ms")
    print(f"baseline  meets {target:g} from D_max = {base:g} ms")
    print(f"delay gap {base - ours:.1f} ms")


if __name__ == "__main__":
    main()
