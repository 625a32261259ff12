"""Prediction and communication co-design for one device and for a cell.

All delays are in slots. For a prediction horizon ``T`` the end-to-end budget
``d_max + T - d_core`` is split between queueing ``D^q`` and ``K`` copies of
``copy_duration`` slots each (plus decoding ``decode_factor * D^t``). The
per-device problem is: find the smallest bandwidth whose near-optimal
overall error (prediction + queueing + transmission) meets the target.
"""

from __future__ import annotations

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .phy import LinkModel, PathLossModel, expected_decoding_error_approx, worst_case_gain
from .prediction import StateModel, prediction_error_curve
from .queueing import TrafficModel, violation_exponent
from .specfun import DomainError

__all__ = [
    "DelayBudget",
    "DeviceScenario",
    "CoDesignSolution",
    "BudgetSplit",
    "SolverStats",
    "InfeasibleError",
    "MonotonicityError",
    "split_delay_budget",
    "evaluate_point",
    "min_overall_error",
    "no_prediction",
    "exhaustive_oracle",
    "exhaustive_solution",
    "min_bandwidth",
    "capacity_known_distribution",
    "capacity_worst_case",
]

log = logging.getLogger(__name__)


class InfeasibleError(Exception):
    """No operating point satisfies the constraints.

    ``constraint`` names the limiting constraint; ``achieved`` carries the best
    overall error reached, when one was computed.
    """

    def __init__(self, message: str, constraint: str, achieved: Optional[float] = None):
        super().__init__(message)
        self.constraint = constraint
        self.achieved = achieved


class MonotonicityError(RuntimeError):
    """The near-optimal overall error was seen to increase with bandwidth."""


@dataclass(frozen=True)
class DelayBudget:
    d_max: float  # slots, user-experienced delay bound
    d_core: float  # slots, backhaul + core network
    decode_factor: float = 0.0

    def __post_init__(self):
        if self.d_core < 0 or self.decode_factor < 0:
            raise DomainError("d_core and decode_factor must be non-negative")


@dataclass(frozen=True, eq=False)
class DeviceScenario:
    state_model: StateModel
    traffic: TrafficModel
    link: LinkModel  # link.bandwidth is the starting point; solvers override it
    delay_budget: DelayBudget
    reliability_target: float
    horizon_cap: int
    bandwidth_cap: float
    repetition_cap: int = 20
    bandwidth_step: float = 15e3  # one subcarrier, the bisection resolution
    path_loss: PathLossModel = field(default_factory=PathLossModel)

    def __post_init__(self):
        if self.horizon_cap <= 0 or self.bandwidth_cap <= 0 or self.repetition_cap <= 0:
            raise DomainError("horizon_cap, bandwidth_cap and repetition_cap must be positive")
        if int(self.horizon_cap) != self.horizon_cap or int(self.repetition_cap) != self.repetition_cap:
            raise DomainError("horizon_cap and repetition_cap must be integers")
        if not (0 < self.reliability_target < 1):
            raise DomainError("reliability_target must lie in (0, 1)")
        if not (0 < self.bandwidth_step < self.bandwidth_cap):
            raise DomainError("bandwidth_step must lie in (0, bandwidth_cap)")

    def with_gain(self, large_scale_gain: float) -> "DeviceScenario":
        return replace(self, link=replace(self.link, large_scale_gain=large_scale_gain))

    def replace(self, **changes) -> "DeviceScenario":
        return replace(self, **changes)


class BudgetSplit(NamedTuple):
    queue_delay: float
    tx_delay: float
    repetitions: int
    eps_queue: float
    eps_tx: float


@dataclass(frozen=True)
class CoDesignSolution:
    horizon: int
    queue_delay: float
    tx_delay: float
    repetitions: int
    bandwidth: float
    eps_prediction: float
    eps_queue: float
    eps_tx: float

    @property
    def eps_overall(self) -> float:
        """Additive approximation of the overall error."""
        return self.eps_queue + self.eps_tx + self.eps_prediction

    @property
    def eps_overall_exact(self) -> float:
        return 1.0 - (1.0 - self.eps_queue) * (1.0 - self.eps_tx) * (1.0 - self.eps_prediction)

    def delay_slack(self, budget: DelayBudget) -> float:
        """D_max minus the delay actually used; zero when the budget is tight."""
        used = self.queue_delay + (1.0 + budget.decode_factor) * self.tx_delay + budget.d_core - self.horizon
        return budget.d_max - used


@dataclass
class SolverStats:
    objective_evaluations: int = 0
    bandwidth_evaluations: int = 0
    history: list = field(default_factory=list)  # (bandwidth, near-optimal error)


class _Problem:
    """Caches shared by the solvers for one scenario (one large-scale gain)."""

    def __init__(self, scenario: DeviceScenario, stats: Optional[SolverStats] = None, eps_p=None):
        self.s = scenario
        self.stats = stats if stats is not None else SolverStats()
        lam = scenario.traffic.arrival_rate
        tau = scenario.link.copy_duration
        self.ks = []
        self.exponents = []
        for k in range(1, int(scenario.repetition_cap) + 1):
            if lam * k * tau >= 1.0:
                break
            self.ks.append(k)
            self.exponents.append(violation_exponent(lam, k * tau))
        self._eps_p = eps_p  # depends on the state model only, so callers may share it
        self._per_copy = {}

    @property
    def eps_p(self) -> np.ndarray:
        if self._eps_p is None:
            self._eps_p = prediction_error_curve(self.s.state_model, int(self.s.horizon_cap))
        return self._eps_p

    def per_copy_error(self, bandwidth: float) -> float:
        e = self._per_copy.get(bandwidth)
        if e is None:
            try:
                e = float(expected_decoding_error_approx(self.s.link.with_bandwidth(bandwidth), warn=False))
            except DomainError:
                # below the validity floor of the approximation: treat the link as unusable
                e = 1.0
            self._per_copy[bandwidth] = e
        return e

    def budget(self, horizon: int) -> float:
        b = self.s.delay_budget
        return b.d_max + horizon - b.d_core

    def split(self, horizon: int, bandwidth: float) -> BudgetSplit:
        self.stats.objective_evaluations += 1
        total = self.budget(horizon)
        kappa = self.s.delay_budget.decode_factor
        tau = self.s.link.copy_duration
        if not self.ks:
            raise InfeasibleError("queue unstable even with a single copy", "queue stability")
        eb = self.per_copy_error(bandwidth)
        best = None
        for k, phi in zip(self.ks, self.exponents):
            tx = k * tau
            dq = total - (1.0 + kappa) * tx
            if dq <= 0:
                break
            eq = math.exp(dq * phi)
            et = eb ** k
            key = max(eq, et)
            if best is None or key < best[0]:
                best = (key, BudgetSplit(dq, tx, k, eq, et))
        if best is None:
            raise InfeasibleError(
                f"delay budget of {total:g} slots leaves no room for one copy "
                f"({(1 + kappa) * tau:g} slots) plus a positive queueing delay",
                "delay budget",
            )
        return best[1]

    def solution(self, horizon: int, bandwidth: float, split: Optional[BudgetSplit] = None) -> CoDesignSolution:
        if split is None:
            split = self.split(horizon, bandwidth)
        return CoDesignSolution(
            horizon=int(horizon),
            queue_delay=split.queue_delay,
            tx_delay=split.tx_delay,
            repetitions=split.repetitions,
            bandwidth=float(bandwidth),
            eps_prediction=float(self.eps_p[horizon]),
            eps_queue=split.eps_queue,
            eps_tx=split.eps_tx,
        )

    def comm_error(self, horizon: int, bandwidth: float) -> float:
        """eps_q + eps_t of the balanced split; 1 where no split fits."""
        try:
            sp = self.split(horizon, bandwidth)
        except InfeasibleError:
            return 1.0
        return sp.eps_queue + sp.eps_tx

    def near_optimal(self, bandwidth: float) -> CoDesignSolution:
        cap = int(self.s.horizon_cap)
        eps_p = self.eps_p

        def below(t):
            # prediction error has not yet overtaken the communication error
            # (2 eps_t when queueing and transmission are exactly balanced)
            return eps_p[t] <= self.comm_error(t, bandwidth)

        if below(cap):
            candidates = [cap]
        elif not below(0):
            candidates = [0]
        else:
            lo, hi = 0, cap
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if below(mid):
                    lo = mid
                else:
                    hi = mid
            candidates = [lo, lo + 1]
        best = None
        for t in candidates:
            try:
                sol = self.solution(t, bandwidth)
            except InfeasibleError:
                continue
            if best is None or sol.eps_overall < best.eps_overall:
                best = sol
        if best is None:
            raise InfeasibleError(
                f"no horizon up to the cap of {cap} slots admits a feasible delay split",
                "delay budget",
            )
        return best

    def exhaustive(self, bandwidth: float) -> CoDesignSolution:
        cap = int(self.s.horizon_cap)
        horizons = np.arange(cap + 1)
        kappa = self.s.delay_budget.decode_factor
        tau = self.s.link.copy_duration
        eb = self.per_copy_error(bandwidth)
        ks = np.array(self.ks, dtype=float)
        if ks.size == 0:
            raise InfeasibleError("queue unstable even with a single copy", "queue stability")
        dq = self.budget(horizons)[:, None] - (1.0 + kappa) * ks[None, :] * tau
        ok = dq > 0
        with np.errstate(under="ignore"):
            eq = np.exp(np.where(ok, dq, 0.0) * np.array(self.exponents)[None, :])
            et = eb ** ks
        obj = np.where(ok, eq + et[None, :] + self.eps_p[:, None], np.inf)
        self.stats.objective_evaluations += int(ok.sum())
        if not np.any(ok):
            raise InfeasibleError("no (horizon, repetitions) pair fits the delay budget", "delay budget")
        t, j = np.unravel_index(int(np.argmin(obj)), obj.shape)
        split = BudgetSplit(float(dq[t, j]), float(ks[j] * tau), int(ks[j]), float(eq[t, j]), float(et[j]))
        return self.solution(int(t), bandwidth, split)


def split_delay_budget(scenario: DeviceScenario, horizon: int, bandwidth: float) -> BudgetSplit:
    """Balance queueing against transmission for a given horizon and bandwidth.

    Scans K = 1..repetition_cap with D^t = K copy_duration and D^q taking the
    rest of the budget, and returns the K minimising max(eps_q, eps_t) (ties go
    to the smaller K).
    """
    return _Problem(scenario).split(horizon, bandwidth)


def evaluate_point(scenario: DeviceScenario, horizon: int, bandwidth: float) -> CoDesignSolution:
    """Full solution at a fixed horizon (used for sweeps and baselines)."""
    return _Problem(scenario).solution(horizon, bandwidth)


def no_prediction(scenario: DeviceScenario, bandwidth: float) -> CoDesignSolution:
    """Baseline without prediction: the horizon is forced to zero."""
    return evaluate_point(scenario, 0, bandwidth)


def min_overall_error(scenario: DeviceScenario, bandwidth: float, *, stats: Optional[SolverStats] = None):
    """Near-optimal horizon and solution at a fixed bandwidth.

    Binary search for the last horizon where the prediction error stays below
    the communication error eps_q + eps_t of the balanced split, then keep the
    better of that horizon and the next one. Returns ``(horizon, solution)``.
    """
    if not bandwidth > 0:
        raise DomainError(f"bandwidth must be positive, got {bandwidth}")
    sol = _Problem(scenario, stats).near_optimal(bandwidth)
    return sol.horizon, sol


def exhaustive_solution(scenario: DeviceScenario, bandwidth: float) -> CoDesignSolution:
    if not bandwidth > 0:
        raise DomainError(f"bandwidth must be positive, got {bandwidth}")
    return _Problem(scenario).exhaustive(bandwidth)


def exhaustive_oracle(scenario: DeviceScenario, bandwidth: float) -> float:
    """Minimum overall error over every (horizon, K) pair at ``bandwidth``."""
    return exhaustive_solution(scenario, bandwidth).eps_overall


def _log_rises(history):
    pts = sorted((b, min(e, 1.0)) for b, e in history)
    for (b0, e0), (b1, e1) in zip(pts[:-1], pts[1:]):
        if e1 > e0:
            log.debug("near-optimal error rose from %.6g at %.6g Hz to %.6g at %.6g Hz", e0, b0, e1, b1)


def min_bandwidth(
    scenario: DeviceScenario,
    *,
    stats: Optional[SolverStats] = None,
    check_monotone: bool = True,
    _eps_p=None,
) -> CoDesignSolution:
    """Smallest bandwidth (to one subcarrier) meeting the reliability target.

    Bisection on [bandwidth_step, bandwidth_cap] with the near-optimal overall
    error as the predicate; returns the solution at the upper bracket end.
    With ``check_monotone`` the point one subcarrier below the answer is
    probed too: if it already meets the target the predicate is not monotone
    in bandwidth and MonotonicityError is raised instead of a wrong answer.
    """
    stats = stats if stats is not None else SolverStats()
    prob = _Problem(scenario, stats, _eps_p)
    target = scenario.reliability_target
    b0 = float(scenario.bandwidth_step)

    def evaluate(b):
        stats.bandwidth_evaluations += 1
        try:
            sol = prob.near_optimal(b)
        except InfeasibleError:
            stats.history.append((b, math.inf))
            return None
        stats.history.append((b, sol.eps_overall))
        return sol

    hi_b = float(scenario.bandwidth_cap)
    hi = evaluate(hi_b)
    if hi is None or hi.eps_overall > target:
        achieved = None if hi is None else hi.eps_overall
        raise InfeasibleError(
            f"reliability target {target:g} not met at the bandwidth cap {hi_b:g} Hz"
            + ("" if achieved is None else f" (best overall error {achieved:.4g})"),
            "bandwidth cap",
            achieved,
        )
    lo_b = b0
    lo = evaluate(lo_b)
    if lo is not None and lo.eps_overall <= target:
        return lo
    while hi_b - lo_b >= b0:
        mid_b = 0.5 * (lo_b + hi_b)
        mid = evaluate(mid_b)
        if mid is not None and mid.eps_overall <= target:
            hi_b, hi = mid_b, mid
        else:
            lo_b = mid_b
    _log_rises(stats.history)
    if check_monotone and hi_b - b0 > b0:
        probe = evaluate(hi_b - b0)
        if probe is not None and probe.eps_overall <= target:
            raise MonotonicityError(
                f"target met at {hi_b - b0:.6g} Hz (error {probe.eps_overall:.4g}) but not at "
                f"{lo_b:.6g} Hz just above it; bisection on bandwidth is unreliable here"
            )
    return hi


def _bandwidth_for_gain(template: DeviceScenario, gain: float, eps_p=None) -> float:
    try:
        return min_bandwidth(template.with_gain(gain), check_monotone=False, _eps_p=eps_p).bandwidth
    except InfeasibleError:
        return math.inf


_DRAW_CHUNK = 4096


def capacity_known_distribution(
    template: DeviceScenario,
    n_devices: int,
    b_total: float,
    distance_range: Sequence[float] = (50.0, 200.0),
    draws: int = 10_000,
    seed: int = 0,
    *,
    workers: int = 1,
    gain_step_db: float = 0.1,
    _cache: Optional[dict] = None,
) -> float:
    """Probability that the devices' minimum bandwidths sum above ``b_total``.

    Distances are uniform over ``distance_range`` and shadowing is zero-mean
    normal in dB. Per-device bandwidths are memoised on a gain grid of
    ``gain_step_db``, rounding the gain down so the bandwidth is never
    underestimated. A device that cannot be served counts as an exceedance.
    Distance and shadowing come from separate substreams per chunk of draws,
    device-major, so adding a device never changes the other devices' draws.
    """
    if int(n_devices) != n_devices or n_devices < 1:
        raise DomainError(f"n_devices must be a positive integer, got {n_devices}")
    if int(draws) != draws or draws < 1:
        raise DomainError(f"draws must be a positive integer, got {draws}")
    n_devices, draws = int(n_devices), int(draws)
    d_lo, d_hi = map(float, distance_range)
    pl = template.path_loss
    cache = {} if _cache is None else _cache
    eps_p = prediction_error_curve(template.state_model, int(template.horizon_cap))

    def bandwidth(level):
        b = cache.get(level)
        if b is None:
            b = _bandwidth_for_gain(template, min(10.0 ** (level * gain_step_db / 10.0), 1.0), eps_p)
            cache[level] = b
        return b

    def chunk(start):
        size = min(_DRAW_CHUNK, draws - start)
        rd = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(start, 0)))
        rs = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(start, 1)))
        dist = rd.uniform(d_lo, d_hi, size=(n_devices, size))
        shadow = pl.shadowing_std_db * rs.standard_normal(size=(n_devices, size))
        gain_db = -pl.path_loss_db(dist) + shadow
        levels = np.floor(gain_db / gain_step_db).astype(np.int64)
        uniq, inv = np.unique(levels, return_inverse=True)
        table = np.array([bandwidth(int(u)) for u in uniq])
        need = table[inv].reshape(levels.shape).sum(axis=0)
        return int(np.count_nonzero(need > b_total))

    starts = list(range(0, draws, _DRAW_CHUNK))
    if workers > 1:
        # concurrent memo misses only duplicate a deterministic computation
        with ThreadPoolExecutor(workers) as pool:
            exceed = sum(pool.map(chunk, starts))
    else:
        exceed = sum(chunk(s) for s in starts)
    return exceed / draws


def capacity_worst_case(template: DeviceScenario, n_devices: int, distance: float = 200.0) -> float:
    """Total bandwidth for ``n_devices`` identical worst-case devices."""
    if int(n_devices) != n_devices or n_devices < 1:
        raise DomainError(f"n_devices must be a positive integer, got {n_devices}")
    gain = worst_case_gain(template.path_loss, distance)
    return n_devices * min_bandwidth(template.with_gain(gain)).bandwidth
