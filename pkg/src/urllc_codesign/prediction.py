"""Linear state prediction and its error probability.

The state evolves as ``X(k+1) = Phi X(k) + W(k)`` with independent Gaussian
noise per feature. A device predicts ``horizon`` slots ahead with
``Phi**horizon X_obs(k)``, where the observed state carries an initial error.
A prediction error event is any feature missing its threshold.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .specfun import DomainError, q_inverse, std_normal_cdf

__all__ = [
    "StateModel",
    "PredictionErrorProfile",
    "build_constant_accel_model",
    "constant_accel_matrix",
    "error_std_vector",
    "error_std_profile",
    "prediction_error_prob",
    "prediction_error_curve",
    "prediction_profile",
    "location_threshold_model",
    "simulate_prediction_error",
    "sample_prediction_errors",
    "sample_trajectory",
    "evaluate_trace",
    "load_trace_csv",
]


def _vec(values, name):
    arr = np.array(values, dtype=float).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class StateModel:
    phi: np.ndarray
    process_noise_std: np.ndarray
    initial_error_std: np.ndarray
    thresholds: np.ndarray
    slot_duration: float

    def __post_init__(self):
        phi = np.array(self.phi, dtype=float)
        if phi.ndim != 2 or phi.shape[0] != phi.shape[1]:
            raise DomainError(f"phi must be square, got shape {phi.shape}")
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)
        f = phi.shape[0]
        for name in ("process_noise_std", "initial_error_std", "thresholds"):
            arr = _vec(getattr(self, name), name)
            if arr.size != f:
                raise DomainError(f"{name} has {arr.size} entries, phi has {f} features")
            object.__setattr__(self, name, arr)
        if np.any(self.process_noise_std < 0) or np.any(self.initial_error_std < 0):
            raise DomainError("standard deviations must be non-negative")
        if not np.all(self.thresholds > 0):
            raise DomainError("thresholds must be positive (use inf for unmonitored features)")
        if not self.slot_duration > 0:
            raise DomainError(f"slot_duration must be positive, got {self.slot_duration}")

    @property
    def n_features(self) -> int:
        return self.phi.shape[0]


@dataclass(frozen=True)
class PredictionErrorProfile:
    horizon: int
    per_feature_std: np.ndarray = field(repr=False)
    error_prob: float


def constant_accel_matrix(slot_duration: float) -> np.ndarray:
    ts = slot_duration
    return np.array([[1.0, ts, ts * ts / 2.0], [0.0, 1.0, ts], [0.0, 0.0, 1.0]])


def build_constant_accel_model(
    slot_duration: float,
    accel_noise_std: float,
    thresholds: Sequence[float],
    initial_error_std: Sequence[float],
) -> StateModel:
    """Location/velocity/acceleration model with noise on the acceleration only."""
    if not slot_duration > 0:
        raise DomainError(f"slot_duration must be positive, got {slot_duration}")
    if not accel_noise_std > 0:
        raise DomainError(f"accel_noise_std must be positive, got {accel_noise_std}")
    return StateModel(
        phi=constant_accel_matrix(slot_duration),
        process_noise_std=[0.0, 0.0, accel_noise_std],
        initial_error_std=initial_error_std,
        thresholds=thresholds,
        slot_duration=slot_duration,
    )


def _check_horizon(horizon):
    if int(horizon) != horizon or horizon < 0:
        raise DomainError(f"horizon must be a non-negative integer, got {horizon}")
    return int(horizon)


def error_std_vector(model: StateModel, horizon: int) -> np.ndarray:
    """Per-feature standard deviation of the prediction error after ``horizon`` slots.

    Accumulated transition noise sum_{i=0}^{T-1} (Phi^i)^2 sigma^2 plus the
    initial error propagated through Phi^T.
    """
    horizon = _check_horizon(horizon)
    var_noise = model.process_noise_std ** 2
    var = np.zeros(model.n_features)
    power = np.eye(model.n_features)
    for _ in range(horizon):
        var += (power * power) @ var_noise
        power = model.phi @ power
    var += (power * power) @ (model.initial_error_std ** 2)
    return np.sqrt(var)


def error_std_profile(model: StateModel, max_horizon: int) -> np.ndarray:
    """``error_std_vector`` for every horizon 0..max_horizon, shape (H+1, F)."""
    max_horizon = _check_horizon(max_horizon)
    f = model.n_features
    var_noise = model.process_noise_std ** 2
    var_init = model.initial_error_std ** 2
    out = np.empty((max_horizon + 1, f))
    noise = np.zeros(f)
    power = np.eye(f)
    for t in range(max_horizon + 1):
        sq = power * power
        out[t] = noise + sq @ var_init
        noise = noise + sq @ var_noise
        power = model.phi @ power
    return np.sqrt(out)


def _error_prob_from_std(std: np.ndarray, thresholds: np.ndarray):
    """1 - prod_j (1 - 2 psi(-delta_j / rho_j)), evaluated in the log domain.

    Accepts std of shape (F,) or (H, F)."""
    std = np.asarray(std, dtype=float)
    with np.errstate(divide="ignore"):
        z = np.where(std > 0, -thresholds / np.where(std > 0, std, 1.0), -np.inf)
    # zero spread or an unmonitored feature never misses its threshold
    finite = np.isfinite(z) & np.isfinite(thresholds)
    tail = np.where(finite, 2.0 * std_normal_cdf(np.where(finite, z, 0.0)), 0.0)
    with np.errstate(divide="ignore"):
        log_keep = np.sum(np.log1p(-tail), axis=-1)
    return -np.expm1(log_keep)


def prediction_error_prob(model: StateModel, horizon: int) -> float:
    """Probability that some feature's prediction error exceeds its threshold."""
    return float(_error_prob_from_std(error_std_vector(model, horizon), model.thresholds))


def prediction_error_curve(model: StateModel, max_horizon: int) -> np.ndarray:
    """``prediction_error_prob`` for horizons 0..max_horizon."""
    return _error_prob_from_std(error_std_profile(model, max_horizon), model.thresholds)


def prediction_profile(model: StateModel, horizon: int) -> PredictionErrorProfile:
    std = error_std_vector(model, horizon)
    return PredictionErrorProfile(int(horizon), std, float(_error_prob_from_std(std, model.thresholds)))


def location_threshold_model(model: StateModel, horizon: int, target: float) -> StateModel:
    """Copy of ``model`` monitoring only feature 0, with the threshold that
    makes the error probability at ``horizon`` equal ``target``."""
    if not (0.0 < target < 1.0):
        raise DomainError(f"target must lie in (0, 1), got {target}")
    rho = error_std_vector(model, horizon)[0]
    if not rho > 0:
        raise DomainError("feature 0 has zero error spread at this horizon")
    thresholds = np.full(model.n_features, np.inf)
    thresholds[0] = rho * q_inverse(target / 2.0)
    return replace(model, thresholds=thresholds)


_CHUNK = 1 << 17


def _chunk_errors(model, horizon, start, size, seed):
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(start,)))
    f = model.n_features
    err = model.initial_error_std[:, None] * rng.standard_normal((f, size))
    noisy = np.flatnonzero(model.process_noise_std > 0)
    sig = model.process_noise_std[noisy][:, None]
    phi = model.phi
    for _ in range(horizon):
        err = phi @ err
        if noisy.size:
            err[noisy] += sig * rng.standard_normal((noisy.size, size))
    return err


def _run_chunks(func, trials, workers):
    starts = list(range(0, trials, _CHUNK))
    sizes = [min(_CHUNK, trials - s) for s in starts]
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            return list(pool.map(func, starts, sizes))
    return [func(s, n) for s, n in zip(starts, sizes)]


def _check_trials(trials):
    if int(trials) != trials or trials < 1:
        raise DomainError(f"trials must be a positive integer, got {trials}")
    return int(trials)


def sample_prediction_errors(model: StateModel, horizon: int, trials: int, seed: int, *, workers: int = 1) -> np.ndarray:
    """Simulated prediction errors after ``horizon`` slots, shape (F, trials)."""
    horizon = _check_horizon(horizon)
    trials = _check_trials(trials)
    parts = _run_chunks(lambda s, n: _chunk_errors(model, horizon, s, n, seed), trials, workers)
    return np.concatenate(parts, axis=1)


def simulate_prediction_error(
    model: StateModel,
    horizon: int,
    trials: int,
    seed: int,
    *,
    workers: int = 1,
) -> float:
    """Monte Carlo estimate of the prediction error probability.

    Each trial draws an initial observation error, propagates the true state
    through ``horizon`` noisy transitions and compares it with the noiseless
    prediction. Trials are split into fixed ranges, each with its own
    substream keyed by (seed, range start), so the estimate is independent of
    ``workers``.
    """
    horizon = _check_horizon(horizon)
    trials = _check_trials(trials)
    thr = model.thresholds[:, None]

    def count(start, size):
        err = _chunk_errors(model, horizon, start, size, seed)
        return int(np.count_nonzero((np.abs(err) > thr).any(axis=0)))

    return sum(_run_chunks(count, trials, workers)) / trials


def sample_trajectory(model: StateModel, n_slots: int, seed: int, initial_state=None) -> np.ndarray:
    """Simulate ``n_slots`` states of the transition model, shape (n_slots, F)."""
    rng = np.random.default_rng(seed)
    f = model.n_features
    x = np.zeros(f) if initial_state is None else np.asarray(initial_state, dtype=float)
    noise = model.process_noise_std * rng.standard_normal((n_slots, f))
    out = np.empty((n_slots, f))
    for k in range(n_slots):
        out[k] = x
        x = model.phi @ x + noise[k]
    return out


def _derivatives(r: np.ndarray, ts: float):
    v = np.empty_like(r)
    a = np.empty_like(r)
    v[1:-1] = (r[2:] - r[:-2]) / (2.0 * ts)
    a[1:-1] = (r[2:] - 2.0 * r[1:-1] + r[:-2]) / ts ** 2
    # second-order one-sided stencils at the ends (exact for quadratics)
    v[0] = (-3.0 * r[0] + 4.0 * r[1] - r[2]) / (2.0 * ts)
    v[-1] = (3.0 * r[-1] - 4.0 * r[-2] + r[-3]) / (2.0 * ts)
    a[0] = (r[0] - 2.0 * r[1] + r[2]) / ts ** 2
    a[-1] = (r[-1] - 2.0 * r[-2] + r[-3]) / ts ** 2
    return v, a


def evaluate_trace(locations, horizon: int, threshold: float, slot_duration: float = 1e-3) -> float:
    """Empirical prediction error probability on a recorded location trace.

    Velocity and acceleration come from first and second order differences;
    every sample with ``horizon`` future samples available is predicted with
    the constant-acceleration transition and scored against ``threshold``.
    """
    r = np.asarray(locations, dtype=float).reshape(-1)
    horizon = _check_horizon(horizon)
    if not threshold > 0:
        raise DomainError(f"threshold must be positive, got {threshold}")
    if r.size <= horizon + 2 or r.size < 3:
        raise DomainError(f"trace of {r.size} samples is too short for horizon {horizon}")
    v, a = _derivatives(r, slot_duration)
    tau = horizon * slot_duration
    n = r.size - horizon
    predicted = r[:n] + v[:n] * tau + a[:n] * tau * tau / 2.0
    err = predicted - r[horizon:]
    return float(np.count_nonzero(np.abs(err) > threshold)) / n


def load_trace_csv(path) -> np.ndarray:
    """Single-column CSV of positions; a non-numeric first line is a header."""
    values = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            cell = line.strip().split(",")[0].strip()
            if not cell:
                continue
            try:
                values.append(float(cell))
            except ValueError:
                if lineno == 1 and not values:
                    continue
                raise DomainError(f"{path}:{lineno}: not a number: {cell!r}") from None
    return np.array(values)
