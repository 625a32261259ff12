"""Effective-bandwidth model of a Poisson-fed transmit queue.

Time is in slots. Packets arrive as a Poisson process with ``arrival_rate``
packets/slot and are served one at a time, each taking ``service_interval``
slots, so the service rate is ``1 / service_interval``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .specfun import DomainError, lambert_w_m1

__all__ = [
    "TrafficModel",
    "QueueOperatingPoint",
    "effective_bandwidth",
    "violation_exponent",
    "delay_violation_prob",
    "required_queue_delay",
    "simulate_queue",
]


@dataclass(frozen=True)
class TrafficModel:
    arrival_rate: float  # packets/slot in the current traffic state

    def __post_init__(self):
        if not self.arrival_rate > 0:
            raise DomainError(f"arrival_rate must be positive, got {self.arrival_rate}")


@dataclass(frozen=True)
class QueueOperatingPoint:
    queue_delay_bound: float
    service_interval: float
    violation_prob: float


def _check_prob(p):
    if not (0.0 < p < 1.0):
        raise DomainError(f"violation probability must lie in (0, 1), got {p}")


def effective_bandwidth(arrival_rate: float, queue_delay_bound: float, violation_prob: float) -> float:
    """Minimal constant service rate (packets/slot) meeting the delay bound."""
    _check_prob(violation_prob)
    if queue_delay_bound <= 0:
        raise DomainError(f"queue delay bound must be positive, got {queue_delay_bound}")
    log_inv = -math.log(violation_prob)
    return log_inv / (queue_delay_bound * math.log1p(log_inv / (arrival_rate * queue_delay_bound)))


def violation_exponent(arrival_rate: float, service_interval: float) -> float:
    """Decay rate per slot of the violation probability, W_{-1}(-x e^-x)/D^t + lambda
    with x = lambda D^t. Negative for a stable queue."""
    x = arrival_rate * service_interval
    if not x < 1.0:
        raise DomainError(
            f"unstable queue: arrival_rate * service_interval = {x:.4g} >= 1 "
            "(service rate does not exceed the arrival rate)"
        )
    if service_interval <= 0:
        raise DomainError(f"service interval must be positive, got {service_interval}")
    w = lambert_w_m1(-x * math.exp(-x))
    return w / service_interval + arrival_rate


def delay_violation_prob(arrival_rate: float, queue_delay_bound: float, service_interval: float) -> float:
    """Probability that the queueing delay exceeds ``queue_delay_bound`` slots."""
    exponent = queue_delay_bound * violation_exponent(arrival_rate, service_interval)
    return math.exp(min(exponent, 0.0))


def required_queue_delay(arrival_rate: float, service_interval: float, violation_prob: float) -> float:
    """Queue delay bound (slots) at which the violation probability equals ``violation_prob``."""
    _check_prob(violation_prob)
    return math.log(violation_prob) / violation_exponent(arrival_rate, service_interval)


_BLOCK_SLOTS = 1 << 20


def _arrivals(arrival_rate, n_slots, seed, workers):
    starts = range(0, n_slots, _BLOCK_SLOTS)

    def block(start):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(start,)))
        return rng.poisson(arrival_rate, size=min(_BLOCK_SLOTS, n_slots - start))

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor

        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(block, starts))
    else:
        parts = [block(s) for s in starts]
    return np.concatenate(parts)


def simulate_queue(
    arrival_rate: float,
    service_interval: float,
    queue_delay_bound: float,
    n_slots: int,
    seed: int,
    *,
    workers: int = 1,
) -> float:
    """Fraction of packets waiting longer than ``queue_delay_bound`` slots.

    Arrivals are Poisson counts per slot (stamped at the slot start), served
    first-come-first-served with a deterministic service time of
    ``service_interval`` slots. Packets arriving during the first
    ``10 * queue_delay_bound`` slots are a warm-up and not counted. Arrival
    counts are drawn in fixed blocks keyed by (seed, block start), so the
    result does not depend on ``workers``.
    """
    if arrival_rate * service_interval >= 1.0:
        raise DomainError("unstable queue: arrival_rate * service_interval >= 1")
    warmup = int(math.ceil(10 * queue_delay_bound))
    if n_slots < warmup:
        raise DomainError(f"n_slots must be >= 10 * queue_delay_bound = {warmup}")
    counts = _arrivals(arrival_rate, int(n_slots), seed, workers)
    t = np.repeat(np.arange(counts.size, dtype=float), counts)
    if t.size == 0:
        return 0.0
    # FCFS with constant service D: departure_n = (n+1) D + max_{k<=n}(a_k - k D)
    n = np.arange(t.size, dtype=float)
    start = n * service_interval + np.maximum.accumulate(t - n * service_interval)
    wait = start - t
    keep = t >= warmup
    if not np.any(keep):
        return 0.0
    return float(np.count_nonzero(wait[keep] > queue_delay_bound)) / float(np.count_nonzero(keep))
