"""Overall error against prediction horizon at a fixed bandwidth.

Prints the interior local minima and the repetition count on either side of
each one; the jumps in the error curve line up with changes of K.

    python3 scripts/horizon_profile.py [--bandwidth-khz 440] [--start-ms 10] [--stop-ms 200]
"""

import argparse
import math

import numpy as np

from urllc_codesign.codesign import InfeasibleError, evaluate_point, min_overall_error
from urllc_codesign.config import default_scenario


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--bandwidth-khz", type=float, default=440.0)
    ap.add_argument("--start-ms", type=float, default=10.0)
    ap.add_argument("--stop-ms", type=float, default=200.0)
    ap.add_argument("--n-antennas", type=int, default=32)
    args = ap.parse_args()

    s = default_scenario(n_antennas=args.n_antennas)
    b = args.bandwidth_khz * 1e3
    slot_ms = s.link.slot_duration * 1e3
    horizons = np.arange(round(args.start_ms / slot_ms), round(args.stop_ms / slot_ms) + 1)
    sols = []
    for t in horizons:
        try:
            sols.append(evaluate_point(s, int(t), b))
        except InfeasibleError:
            sols.append(None)
    err = np.array([math.inf if x is None else x.eps_overall for x in sols])

    best = int(np.argmin(err))
    print(f"global minimum {err[best]:.4g} at {horizons[best] * slot_ms:g} ms (K={sols[best].repetitions})")
    for i in range(1, err.size - 1):
        if err[i] < err[i - 1] and err[i] <= err[i + 1]:
            ks = sorted({x.repetitions for x in sols[max(i - 20, 0):i + 21] if x is not None})
            print(f"local minimum {err[i]:.4g} at {horizons[i] * slot_ms:g} ms; K nearby: {ks}")
    t, sol = min_overall_error(s, b)
    print(f"near-optimal search: {sol.eps_overall:.4g} at {t * slot_ms:g} ms (K={sol.repetitions})")


if __name__ == "__main__":
    main()
