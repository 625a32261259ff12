import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from urllc_codesign import codesign as cd
from urllc_codesign.config import default_scenario
from urllc_codesign.phy import expected_decoding_error_approx, worst_case_gain
from urllc_codesign.prediction import prediction_error_prob
from urllc_codesign.queueing import delay_violation_prob
from urllc_codesign.specfun import DomainError

B = 440e3


@pytest.fixture(scope="module")
def s():
    return default_scenario()


def _brute_split(s, horizon, bandwidth):
    """Oracle: scan K with the public queueing and link functions."""
    eb = expected_decoding_error_approx(s.link.with_bandwidth(bandwidth), warn=False)
    lam = s.traffic.arrival_rate
    total = s.delay_budget.d_max + horizon - s.delay_budget.d_core
    best = None
    for k in range(1, s.repetition_cap + 1):
        tx = k * s.link.copy_duration
        dq = total - tx
        if lam * tx >= 1 or dq <= 0:
            break
        eq, et = delay_violation_prob(lam, dq, tx), eb ** k
        if best is None or max(eq, et) < best[0]:
            best = (max(eq, et), k, eq, et)
    return best


def _brute_optimum(s, bandwidth):
    best = math.inf
    for t in range(s.horizon_cap + 1):
        eb = expected_decoding_error_approx(s.link.with_bandwidth(bandwidth), warn=False)
        ep = prediction_error_prob(s.state_model, t)
        for k in range(1, s.repetition_cap + 1):
            tx = k * s.link.copy_duration
            dq = s.delay_budget.d_max + t - s.delay_budget.d_core - tx
            if s.traffic.arrival_rate * tx >= 1 or dq <= 0:
                continue
            best = min(best, ep + delay_violation_prob(s.traffic.arrival_rate, dq, tx) + eb ** k)
    return best


class TestSplit:
    @given(st.integers(106, 2000), st.sampled_from([0.22e6, 0.44e6, 0.88e6]))
    def test_matches_brute_force(self, horizon, bandwidth):
        s = default_scenario()
        sp = cd.split_delay_budget(s, horizon, bandwidth)
        _, k, eq, et = _brute_split(s, horizon, bandwidth)
        assert sp.repetitions == k
        assert sp.eps_queue == pytest.approx(eq, rel=1e-9)
        assert sp.eps_tx == pytest.approx(et, rel=1e-12)

    @given(st.integers(106, 2000), st.floats(0.15e6, 2e6))
    def test_delay_identity(self, horizon, bandwidth):
        s = default_scenario()
        sol = cd.evaluate_point(s, horizon, bandwidth)
        assert sol.delay_slack(s.delay_budget) == pytest.approx(0.0, abs=1e-9)
        assert sol.tx_delay == sol.repetitions * s.link.copy_duration

    def test_infeasible_budget(self, s):
        with pytest.raises(cd.InfeasibleError) as err:
            cd.split_delay_budget(s, 100, B)
        assert err.value.constraint == "delay budget"

    def test_decode_factor_consumes_budget(self, s):
        from dataclasses import replace

        slow = s.replace(delay_budget=replace(s.delay_budget, decode_factor=1.0))
        sol = cd.evaluate_point(slow, 400, B)
        assert sol.delay_slack(slow.delay_budget) == pytest.approx(0.0, abs=1e-9)
        assert sol.queue_delay == pytest.approx(300 - 2 * sol.tx_delay)


class TestPoint:
    def test_components(self, s):
        sol = cd.evaluate_point(s, 700, B)
        assert sol.eps_prediction == pytest.approx(prediction_error_prob(s.state_model, 700), rel=1e-12)
        assert sol.eps_overall == pytest.approx(sol.eps_prediction + sol.eps_queue + sol.eps_tx)
        assert sol.eps_overall_exact <= sol.eps_overall

    def test_no_prediction_uses_zero_horizon(self, s):
        from dataclasses import replace

        relaxed = s.replace(delay_budget=replace(s.delay_budget, d_max=150.0))
        sol = cd.no_prediction(relaxed, B)
        assert sol.horizon == 0
        # only the initial estimate error remains
        assert sol.eps_prediction == pytest.approx(prediction_error_prob(s.state_model, 0), rel=1e-12)

    def test_bad_bandwidth(self, s):
        with pytest.raises(DomainError):
            cd.min_overall_error(s, 0.0)


class TestNearOptimal:
    @pytest.mark.parametrize("bandwidth", [0.22e6, 0.44e6, 0.88e6])
    def test_gap_below_optimum(self, s, bandwidth):
        _, sol = cd.min_overall_error(s, bandwidth)
        opt = cd.exhaustive_oracle(s, bandwidth)
        assert opt <= sol.eps_overall * (1 + 1e-12)
        assert sol.eps_overall - opt < opt

    def test_exhaustive_matches_brute_force(self):
        s = default_scenario(horizon_cap_ms=60.0)
        assert cd.exhaustive_oracle(s, B) == pytest.approx(_brute_optimum(s, B), rel=1e-9)

    def test_horizon_cap_respected(self):
        s = default_scenario(horizon_cap_ms=30.0)
        t, sol = cd.min_overall_error(s, B)
        assert t <= s.horizon_cap and sol.horizon == t

    def test_exhaustive_beats_baseline(self):
        s = default_scenario(d_max_ms=20.0)
        assert cd.exhaustive_oracle(s, B) <= cd.no_prediction(s, B).eps_overall

    @given(st.integers(0, 2 ** 32 - 1))
    def test_random_scenarios_gap(self, seed):
        rng = np.random.default_rng(seed)
        s = default_scenario(
            n_antennas=int(rng.choice([16, 32, 64])),
            d_max_ms=float(rng.uniform(0, 20)),
            accel_noise_std=float(10 ** rng.uniform(-2.5, -1.5)),
            horizon_cap_ms=100.0,
        )
        b = float(rng.uniform(0.3e6, 1.5e6))
        _, sol = cd.min_overall_error(s, b)
        opt = cd.exhaustive_oracle(s, b)
        assert sol.eps_overall - opt < opt


class TestMinBandwidth:
    def test_default(self, s):
        stats = cd.SolverStats()
        sol = cd.min_bandwidth(s, stats=stats)
        assert sol.eps_overall <= s.reliability_target
        assert 220e3 <= sol.bandwidth <= 880e3
        assert cd.min_overall_error(s, sol.bandwidth - s.bandwidth_step)[1].eps_overall > s.reliability_target
        assert stats.bandwidth_evaluations <= math.ceil(math.log2(s.bandwidth_cap / s.bandwidth_step)) + 3

    def test_more_antennas_need_less(self, s):
        b64 = cd.min_bandwidth(default_scenario(n_antennas=64)).bandwidth
        assert b64 < cd.min_bandwidth(s).bandwidth

    def test_cap_infeasible(self):
        s = default_scenario(bandwidth_cap_mhz=0.2)
        with pytest.raises(cd.InfeasibleError) as err:
            cd.min_bandwidth(s)
        assert err.value.constraint == "bandwidth cap"
        assert err.value.achieved is not None and err.value.achieved > s.reliability_target

    def test_non_monotone_predicate_detected(self, s, monkeypatch):
        cutoff = 500e3
        false_seen = []

        def fake(self, b):
            # meets the target above the cutoff, and also just below any
            # bandwidth that already failed: a deliberately non-monotone response
            ok = b >= cutoff or any(0 < f - b < s.bandwidth_step for f in false_seen)
            if not ok:
                false_seen.append(b)
            eps = 0.5 * s.reliability_target if ok else 2 * s.reliability_target
            return cd.CoDesignSolution(0, 1.0, 5, 1, b, eps, 0.0, 0.0)

        monkeypatch.setattr(cd._Problem, "near_optimal", fake)
        with pytest.raises(cd.MonotonicityError):
            cd.min_bandwidth(s)


@pytest.fixture(scope="module")
def cache():
    c = {}
    cd.capacity_known_distribution(default_scenario(), 100, 10e6, draws=2000, seed=1, _cache=c)
    return c


class TestCapacity:
    def test_worst_case_is_linear(self, s):
        one = cd.capacity_worst_case(s, 1)
        assert cd.capacity_worst_case(s, 7) == pytest.approx(7 * one)

    def test_worst_case_saving_with_antennas(self, s):
        b32 = cd.capacity_worst_case(s, 1)
        b64 = cd.capacity_worst_case(default_scenario(n_antennas=64), 1)
        assert 1 - b64 / b32 >= 0.5

    def test_worst_case_gain_used(self, s):
        one = cd.capacity_worst_case(s, 1, distance=100.0)
        direct = cd.min_bandwidth(s.with_gain(worst_case_gain(s.path_loss, 100.0))).bandwidth
        assert one == direct

    def test_exceedance_nondecreasing_in_devices(self, s, cache):
        probs = [cd.capacity_known_distribution(s, n, 10e6, draws=2000, seed=1, _cache=cache)
                 for n in (80, 92, 94, 96, 98, 100)]
        assert all(0 <= p <= 1 for p in probs)
        assert all(a <= b for a, b in zip(probs, probs[1:]))
        assert probs[0] == 0.0 and probs[-1] == 1.0

    def test_worker_invariant(self, s):
        a = cd.capacity_known_distribution(s, 20, 4e6, (300.0, 800.0), draws=9000, seed=3, workers=1)
        b = cd.capacity_known_distribution(s, 20, 4e6, (300.0, 800.0), draws=9000, seed=3, workers=8)
        assert a == b and 0.0 < a < 1.0

    def test_floor_bound_devices(self, s, cache):
        # apart from deep shadowing, devices sit at the blocklength floor
        floor = cd.min_bandwidth(s.with_gain(1e-12)).bandwidth
        vals = np.array([b for b in cache.values() if math.isfinite(b)])
        assert vals.min() == floor
        assert np.mean(vals == floor) > 0.9

    def test_bad_arguments(self, s):
        with pytest.raises(DomainError):
            cd.capacity_known_distribution(s, 0, 1e6)
        with pytest.raises(DomainError):
            cd.capacity_worst_case(s, 2.5)
