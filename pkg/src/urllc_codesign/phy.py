"""Finite-blocklength decoding error over a SIMO Rayleigh link.

Conventions: bandwidth in Hz, power in watts, noise PSD in W/Hz, gains linear,
durations of a copy in slots. The blocklength of one copy is
``data_fraction * copy_duration * slot_duration * bandwidth`` symbols.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import special

from .specfun import DomainError, fading_expectation, q_inverse

__all__ = [
    "LinkModel",
    "PathLossModel",
    "MIN_BLOCKLENGTH",
    "worst_case_gain",
    "large_scale_gain",
    "conditional_decoding_error",
    "expected_decoding_error",
    "expected_decoding_error_approx",
    "repetition_loss",
    "approx_slope",
]

MIN_BLOCKLENGTH = 50.0
LN2 = math.log(2.0)


@dataclass(frozen=True)
class LinkModel:
    bandwidth: float
    tx_power: float
    noise_psd: float
    large_scale_gain: float
    n_antennas: int
    payload_bits: int
    slot_duration: float
    copy_duration: int
    snr_loss: float = 1.0
    data_fraction: float = 1.0

    def __post_init__(self):
        if self.bandwidth <= 0 or self.tx_power <= 0 or self.noise_psd <= 0:
            raise DomainError("bandwidth, tx_power and noise_psd must be positive")
        if not (0 < self.large_scale_gain <= 1):
            raise DomainError(f"large_scale_gain must lie in (0, 1], got {self.large_scale_gain}")
        if self.snr_loss < 1:
            raise DomainError(f"snr_loss must be >= 1, got {self.snr_loss}")
        if int(self.n_antennas) != self.n_antennas or self.n_antennas < 1:
            raise DomainError(f"n_antennas must be a positive integer, got {self.n_antennas}")
        if not (0 < self.data_fraction <= 1):
            raise DomainError(f"data_fraction must lie in (0, 1], got {self.data_fraction}")
        if self.payload_bits <= 0 or self.slot_duration <= 0 or self.copy_duration <= 0:
            raise DomainError("payload_bits, slot_duration and copy_duration must be positive")
        m = self.blocklength
        if m < MIN_BLOCKLENGTH or m < self.payload_bits / 10.0:
            raise DomainError(
                f"blocklength {m:.1f} symbols is below the normal-approximation floor "
                f"(>= {MIN_BLOCKLENGTH:g} symbols and >= payload/10 = {self.payload_bits / 10:g})"
            )

    @property
    def blocklength(self) -> float:
        return self.data_fraction * self.copy_duration * self.slot_duration * self.bandwidth

    @property
    def snr_per_unit_gain(self) -> float:
        """SNR produced by a unit small-scale gain."""
        return self.large_scale_gain * self.tx_power / (self.snr_loss * self.noise_psd * self.bandwidth)

    @property
    def coding_rate(self) -> float:
        """Bits per channel use."""
        return self.payload_bits / self.blocklength

    def with_bandwidth(self, bandwidth: float) -> "LinkModel":
        return replace(self, bandwidth=bandwidth)


@dataclass(frozen=True)
class PathLossModel:
    """Log-distance path loss with log-normal shadowing (all in dB)."""

    fixed_loss_db: float = 35.3
    distance_exponent_db: float = 37.6
    shadowing_std_db: float = 8.0
    availability_target: float = 1e-5

    def __post_init__(self):
        if min(self.fixed_loss_db, self.distance_exponent_db, self.shadowing_std_db) <= 0:
            raise DomainError("path-loss parameters must be positive")
        if not (0 < self.availability_target <= 0.5):
            raise DomainError("availability_target must lie in (0, 0.5]")

    def path_loss_db(self, distance):
        return self.fixed_loss_db + self.distance_exponent_db * np.log10(distance)

    @property
    def worst_shadowing_db(self) -> float:
        """Gain-reducing shadowing quantile, e.g. -34.1 dB for 8 dB at 1e-5."""
        return -self.shadowing_std_db * q_inverse(self.availability_target)


def large_scale_gain(model: PathLossModel, distance, shadowing_db=0.0):
    """Linear large-scale gain for a given distance and shadowing draw (dB)."""
    gain_db = -model.path_loss_db(distance) + np.asarray(shadowing_db, dtype=float)
    out = 10.0 ** (gain_db / 10.0)
    return float(out) if np.ndim(out) == 0 else out


def worst_case_gain(model: PathLossModel, distance: float) -> float:
    """Gain exceeded with probability ``1 - availability_target`` at ``distance``."""
    if distance < 1:
        raise DomainError(f"distance must be >= 1 m, got {distance}")
    return large_scale_gain(model, distance, model.worst_shadowing_db)


def conditional_decoding_error(link: LinkModel, gain_sample):
    """Decoding error of one copy given the small-scale gain ``g``."""
    g = np.asarray(gain_sample, dtype=float)
    if np.any(g < 0):
        raise DomainError("small-scale gain must be non-negative")
    m = link.blocklength
    gamma = link.snr_per_unit_gain * g
    with np.errstate(divide="ignore", invalid="ignore"):
        # V = 1 - (1+g)^-2 written to avoid cancellation at low SNR
        disp = gamma * (2.0 + gamma) / (1.0 + gamma) ** 2
        arg = np.sqrt(m / disp) * (np.log1p(gamma) - link.payload_bits * LN2 / m)
    out = np.where(gamma > 0, special.ndtr(-np.where(gamma > 0, arg, 0.0)), 1.0)
    return float(out) if out.ndim == 0 else out


def _rate_matching_gain(link: LinkModel) -> float:
    return (2.0 ** link.coding_rate - 1.0) / link.snr_per_unit_gain


def expected_decoding_error(link: LinkModel) -> float:
    """Reference quadrature of the conditional error over Erlang(N_r) fading."""
    val = fading_expectation(
        lambda g: conditional_decoding_error(link, g),
        link.n_antennas,
        breakpoints=[_rate_matching_gain(link)],
    )
    return min(max(val, 0.0), 1.0)


def approx_slope(coding_rate: float) -> float:
    """Slope factor omega of the linearised Q-function around the rate threshold
    (the linear piece falls from 1 to 0 over an SNR interval of 1/(omega sqrt(m)))."""
    return 1.0 / (2.0 * math.pi * math.sqrt(2.0 ** (2.0 * coding_rate) - 1.0))


def _approx_terms(link: LinkModel):
    m = link.blocklength
    r = link.coding_rate
    omega = approx_slope(r)
    theta = 2.0 ** r - 1.0
    half = 1.0 / (2.0 * omega * math.sqrt(m))
    xi, zeta = theta + half, theta - half
    if zeta <= 0:
        raise DomainError(
            f"linearisation interval reaches SNR <= 0 (zeta = {zeta:.3g}); "
            f"blocklength {m:.1f} too small for rate {r:.3g}"
        )
    c = link.snr_per_unit_gain
    return omega, m, c, xi / c, zeta / c


def _integrated_erlang_cdf(y: float, k: int) -> float:
    # int_0^y P(k, x) dx = y P(k, y) - k P(k+1, y)
    return y * special.gammainc(k, y) - k * special.gammainc(k + 1, y)


def expected_decoding_error_approx(link: LinkModel, *, warn: bool = True) -> float:
    """Closed-form expected decoding error of one copy (linearised Q-function).

    The Q-function is replaced by a line of slope ``omega sqrt(m)`` through the
    rate threshold and averaged over the fading gain. The average is written
    with integrated Erlang CDFs, which do not cancel catastrophically when both
    ends of the linear interval sit far below the antenna count.
    """
    omega, m, c, g_up, g_lo = _approx_terms(link)
    k = link.n_antennas
    bracket = _integrated_erlang_cdf(g_up, k) - _integrated_erlang_cdf(g_lo, k)
    val = omega * math.sqrt(m) * c * bracket
    if val > 1.0:
        if warn:
            warnings.warn(f"closed-form decoding error {val:.4g} > 1 clamped to 1", RuntimeWarning, stacklevel=2)
        return 1.0
    return max(val, 0.0)


def expected_decoding_error_approx_terms(link: LinkModel) -> float:
    """Same quantity summed term by term as A_i differences of Poisson masses.

    Kept for cross-checking; loses absolute accuracy ~1e-16 * (gU - gL) c omega sqrt(m).
    """
    omega, m, c, g_up, g_lo = _approx_terms(link)
    k = link.n_antennas
    i = np.arange(k + 1)
    log_fact = special.gammaln(i + 1)
    a_lo = np.exp(i * math.log(g_lo) - g_lo - log_fact)
    a_up = np.exp(i * math.log(g_up) - g_up - log_fact)
    total = (g_up - g_lo) - float(np.sum((k - i) * (a_lo - a_up)))
    return omega * math.sqrt(m) * c * total


def repetition_loss(per_copy_error: float, k: int) -> float:
    """Loss after ``k`` independent copies."""
    if int(k) != k or k < 1:
        raise DomainError(f"repetition count must be a positive integer, got {k}")
    if not (0.0 <= per_copy_error <= 1.0):
        raise DomainError(f"per-copy error must lie in [0, 1], got {per_copy_error}")
    return per_copy_error ** int(k)
