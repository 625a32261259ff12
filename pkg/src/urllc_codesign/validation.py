"""Named oracle and invariant checks behind ``urllc-codesign validate``.

Every check reports its grid size, the measured and expected values and the
tolerance it was held to. ``tolerance_scale`` multiplies every tolerance, so
setting it to 0 turns the suite into a sentinel that must fail.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from typing import Callable, List, Optional

import numpy as np

from . import codesign as cd
from .config import ExperimentConfig, default_scenario
from .phy import expected_decoding_error, expected_decoding_error_approx, repetition_loss
from .prediction import (
    build_constant_accel_model,
    location_threshold_model,
    prediction_error_curve,
    simulate_prediction_error,
)
from .queueing import delay_violation_prob, effective_bandwidth, required_queue_delay, simulate_queue
from .specfun import lambert_w_m1, q_inverse

__all__ = ["Check", "run_checks", "format_report", "CHECKS"]

# mpmath values at 40 digits, see scripts/derive_oracles.py
_DECODING_ORACLE = {
    (16, 440e3): 0.90777891693097205,
    (32, 440e3): 0.069564153087027571,
    (64, 880e3): 3.4474769370017053e-10,
    (32, 220e3): 0.40658150907696569,
}
_LAMBERT_ORACLE = {
    -0.3678794: -1.0004731826130853819,
    -0.2: -2.5426413577735263328,
    -1e-3: -9.1180064704027400979,
    -1e-30: -73.373110313822976713,
}
_QINV_ORACLE = {1e-5: 4.2648907939228246285, 1e-9: 5.9978070150076868716, 0.3: 0.52440051270804078404}


@dataclass(frozen=True)
class Check:
    name: str
    grid: int
    measured: float
    expected: str
    tolerance: float
    passed: bool
    seconds: float = 0.0
    note: str = ""


def _rel(a, b):
    return abs(a - b) / abs(b)


def _q_inverse(scale):
    errs = [_rel(q_inverse(p), v) for p, v in _QINV_ORACLE.items()]
    tol = 1e-13 * scale
    return len(errs), max(errs), "0 (mpmath)", tol, max(errs) <= tol, ""


def _lambert(scale):
    errs = [_rel(lambert_w_m1(x), v) for x, v in _LAMBERT_ORACLE.items()]
    tol = 1e-13 * scale
    return len(errs), max(errs), "0 (mpmath)", tol, max(errs) <= tol, ""


def _quadrature(scale):
    errs = []
    for (nr, bw), ref in _DECODING_ORACLE.items():
        errs.append(_rel(expected_decoding_error(default_scenario(n_antennas=nr, bandwidth_mhz=bw / 1e6).link), ref))
    tol = 1e-8 * scale
    return len(errs), max(errs), "0 (mpmath)", tol, max(errs) <= tol, ""


def _inverse_pair(scale):
    rng = np.random.default_rng(1)
    worst = 0.0
    n = 1000
    for _ in range(n):
        lam = 10 ** rng.uniform(-3, 0)
        dt = rng.uniform(0.02, 0.98) / lam
        eps = 10 ** rng.uniform(-12, -0.5)
        dq = required_queue_delay(lam, dt, eps)
        eb = effective_bandwidth(lam, dq, delay_violation_prob(lam, dq, dt))
        worst = max(worst, abs(eb * dt - 1.0))
    tol = 1e-9 * scale
    return n, worst, "0", tol, worst <= tol, "relative error of E_B vs 1/D^t"


def _error_monotone(scale):
    s = default_scenario()
    curve = prediction_error_curve(s.state_model, 500)[1:]
    drops = np.maximum(curve[:-1] - curve[1:], 0.0)
    worst = float(drops.max())
    return curve.size, worst, "0 (nondecreasing)", 0.0, worst <= 0.0, "largest decrease of eps_p"


def _violation_decreasing(scale):
    grid = np.arange(1, 10_001)
    worst = 0
    # decay rates between 1e-5 and 0.07 per slot keep eps_q representable up to 1e4 slots
    pairs = [(0.01, 40), (0.05, 15), (0.2, 4.5), (0.5, 1.9), (0.001, 900)]
    for lam, dt in pairs:
        vals = np.array([delay_violation_prob(lam, float(d), dt) for d in grid])
        worst += int(np.count_nonzero(np.diff(vals) >= 0))
    return len(pairs) * grid.size, worst, "0 violations", 0.0, worst == 0, "strict decrease"


def _repetition_decreasing(scale):
    bad = 0
    for e in (1e-1, 1e-2, 1e-3):
        vals = [repetition_loss(e, k) for k in range(1, 11)]
        bad += sum(b >= a for a, b in zip(vals[:-1], vals[1:]))
    return 30, bad, "0 violations", 0.0, bad == 0, ""


def _balanced_trajectory(scale):
    s = default_scenario()
    b = 440e3
    prob = cd._Problem(s)
    first = int(math.floor(s.delay_budget.d_core - s.delay_budget.d_max + s.link.copy_duration)) + 1
    vals = []
    for t in range(first, s.horizon_cap + 1):
        sp = prob.split(t, b)
        vals.append(max(sp.eps_queue, sp.eps_tx))
    vals = np.array(vals)
    rises = int(np.count_nonzero(vals[1:] > vals[:-1]))
    return vals.size, rises, "0 rises", 0.0, rises == 0, "max(eps_q, eps_t) along the balanced split"


def _near_optimal_gap(scale):
    s = default_scenario()
    worst = 0.0
    n = 0
    for b in (0.22e6, 0.44e6, 0.88e6):
        _, sol = cd.min_overall_error(s, b)
        opt = cd.exhaustive_oracle(s, b)
        worst = max(worst, (sol.eps_overall - opt) / opt)
        n += 1
    tol = 1.0 * scale
    return n, worst, "< 1 (gap below optimum)", tol, worst < tol, "(near-optimal - optimum) / optimum"


def _delay_identity(scale):
    s = default_scenario()
    worst = 0.0
    n = 0
    for b in (0.22e6, 0.44e6, 0.88e6):
        _, sol = cd.min_overall_error(s, b)
        worst = max(worst, abs(sol.delay_slack(s.delay_budget)))
        n += 1
    return n, worst, "0 slots of slack", 1e-9 * scale, worst <= 1e-9 * scale, ""


def _additivity(scale):
    s = default_scenario()
    worst = 0.0
    n = 0
    for b in np.linspace(0.25e6, 1.0e6, 16):
        _, sol = cd.min_overall_error(s, float(b))
        worst = max(worst, abs(sol.eps_overall_exact - sol.eps_overall))
        n += 1
    tol = 1e-9 * scale
    return n, worst, "0", tol, worst < tol, "|product form - sum form|"


def _prediction_mc(scale):
    horizon = 40
    model = location_threshold_model(
        build_constant_accel_model(1e-3, 0.05, [1.0, math.inf, math.inf], [0.01, 0.2, 0.1]), horizon, 1e-2
    )
    p = float(prediction_error_curve(model, horizon)[-1])
    trials = 200_000
    est = simulate_prediction_error(model, horizon, trials, seed=11)
    z = abs(est - p) / math.sqrt(p * (1 - p) / trials)
    tol = 3.0 * scale
    return trials, z, f"|z| <= 3 around {p:.4g}", tol, z <= tol, "binomial z-score"


def _queue_mc(scale):
    lam, dt = 0.05, 10.0
    dq = required_queue_delay(lam, dt, 1e-2)
    sim = simulate_queue(lam, dt, dq, 1_000_000, seed=5)
    ratio = sim / 1e-2
    tol = 2.0 * scale
    return 1_000_000, ratio, "<= 2 x analytic", tol, ratio <= tol, "simulated / analytic violation"


def _closed_form(scale):
    worst = 0.0
    n = 0
    for nr in (16, 32, 64):
        for bw in (0.22, 0.44, 0.88):
            link = default_scenario(n_antennas=nr, bandwidth_mhz=bw).link
            exact = expected_decoding_error(link)
            approx = expected_decoding_error_approx(link, warn=False)
            worst = max(worst, abs(approx - exact) / exact)
            n += 1
    tol = 0.25 * scale
    return n, worst, "<= 0.25", tol, worst <= tol, "closed form vs quadrature, relative"


def _u_shape(scale):
    s = default_scenario()
    prob = cd._Problem(s)
    grid = np.arange(100, s.horizon_cap + 1, 10)  # 1 ms steps from 10 ms
    vals = []
    for t in grid:
        try:
            vals.append(prob.solution(int(t), 440e3).eps_overall)
        except cd.InfeasibleError:
            vals.append(math.inf)
    v = np.array(vals)
    interior = [i for i in range(1, v.size - 1) if v[i] < v[i - 1] and v[i] <= v[i + 1]]
    ok = len(interior) == 1
    note = "local minima at " + ", ".join(f"{grid[i] * 0.1:g} ms" for i in interior)
    return v.size, len(interior), "1 interior minimum", 0.0, ok, note


CHECKS: List[tuple] = [
    ("specfun.q_inverse_vs_mpmath", _q_inverse),
    ("specfun.lambert_w_m1_vs_mpmath", _lambert),
    ("phy.fading_quadrature_vs_mpmath", _quadrature),
    ("phy.closed_form_vs_quadrature", _closed_form),
    ("queueing.inverse_pair", _inverse_pair),
    ("queueing.violation_strictly_decreasing", _violation_decreasing),
    ("queueing.monte_carlo_bound", _queue_mc),
    ("prediction.error_nondecreasing", _error_monotone),
    ("prediction.monte_carlo", _prediction_mc),
    ("phy.repetition_strictly_decreasing", _repetition_decreasing),
    ("codesign.balanced_split_nonincreasing", _balanced_trajectory),
    ("codesign.near_optimal_gap", _near_optimal_gap),
    ("codesign.delay_identity", _delay_identity),
    ("codesign.additive_vs_product", _additivity),
    ("codesign.horizon_sweep_single_minimum", _u_shape),
]


def run_checks(cfg: Optional[ExperimentConfig] = None, *, only: Optional[Callable[[str], bool]] = None) -> List[Check]:
    scale = 1.0 if cfg is None else cfg.tolerance_scale
    out = []
    for name, fn in CHECKS:
        if only is not None and not only(name):
            continue
        t0 = time.perf_counter()
        grid, measured, expected, tol, passed, note = fn(scale)
        out.append(Check(name, int(grid), float(measured), expected, float(tol), bool(passed),
                         time.perf_counter() - t0, note))
    return out


def format_report(checks: List[Check]) -> str:
    lines = ["check,grid,measured,expected,tolerance,status,seconds,note"]
    for c in checks:
        note = c.note.replace(",", ";")
        lines.append(
            f"{c.name},{c.grid},{c.measured:.6e},{c.expected},{c.tolerance:.3g},"
            f"{'pass' if c.passed else 'FAIL'},{c.seconds:.2f},{note}"
        )
    failed = sum(not c.passed for c in checks)
    lines.append(f"# {len(checks) - failed}/{len(checks)} checks passed")
    return "\n".join(lines) + "\n"
