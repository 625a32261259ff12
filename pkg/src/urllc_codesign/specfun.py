"""Special functions and quadrature kernels used by the error models.

Only what the models need: the standard normal CDF and its tail inverse,
the lower real branch of the Lambert W function, and expectations over the
Erlang-distributed post-combining gain of a Rayleigh SIMO link.
"""

from __future__ import annotations

import math
from functools import lru_cache
from typing import Callable, Iterable, Optional

import numpy as np
from scipy import integrate, special

__all__ = [
    "DomainError",
    "Probability",
    "std_normal_cdf",
    "q_function",
    "q_inverse",
    "lambert_w_m1",
    "erlang_pdf",
    "fading_expectation",
]

_SQRT2 = math.sqrt(2.0)
_INV_E = math.exp(-1.0)


class DomainError(ValueError):
    """Argument outside the domain where a model or function is defined."""


class Probability(float):
    """A float constrained to [0, 1]."""

    def __new__(cls, value):
        v = float(value)
        if not (0.0 <= v <= 1.0):
            raise DomainError(f"probability must lie in [0, 1], got {value!r}")
        return super().__new__(cls, v)


def std_normal_cdf(x):
    """Standard normal CDF, evaluated through erfc so the lower tail keeps
    relative accuracy down to ~1e-300. Accepts scalars or arrays."""
    if np.ndim(x) == 0:
        x = float(x)
        if not math.isfinite(x):
            raise DomainError(f"std_normal_cdf needs a finite argument, got {x}")
        return 0.5 * math.erfc(-x / _SQRT2)
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise DomainError("std_normal_cdf needs finite arguments")
    return special.ndtr(x)


def q_function(x):
    """Gaussian tail probability Q(x) = 1 - psi(x)."""
    if np.ndim(x) == 0:
        return std_normal_cdf(-float(x))
    return std_normal_cdf(-np.asarray(x, dtype=float))


def q_inverse(p: float) -> float:
    """Return x with Q(x) = p for 0 < p < 1."""
    p = float(p)
    if not (0.0 < p < 1.0):
        raise DomainError(f"q_inverse needs 0 < p < 1, got {p}")
    x = _SQRT2 * float(special.erfcinv(2.0 * p))
    # one Newton polish on Q(x) - p; the derivative of Q is -pdf
    pdf = math.exp(-0.5 * x * x) / math.sqrt(2.0 * math.pi)
    if pdf > 0.0:
        x += (q_function(x) - p) / pdf
    return x


def lambert_w_m1(x: float, *, tol: float = 1e-15, max_iter: int = 100) -> float:
    """Lower real branch W_{-1}(x) for -1/e <= x < 0.

    Halley iterations from an asymptotic (x -> 0-) or branch-point series
    start, kept inside a shrinking bracket with bisection fallback.
    """
    x = float(x)
    if not (-_INV_E - 1e-16 <= x < 0.0) or not math.isfinite(x):
        raise DomainError(f"W_-1 is defined on [-1/e, 0), got {x}")
    if x <= -_INV_E:
        return -1.0
    if x > -1e-250:
        # w e^w underflows here; solve w + ln(-w) = ln(-x) instead
        lx = math.log(-x)
        w = lx - math.log(-lx)
        for _ in range(max_iter):
            step = (w + math.log(-w) - lx) / (1.0 + 1.0 / w)
            w -= step
            if abs(step) <= tol * abs(w):
                break
        return w

    # f(w) = w e^w - x is decreasing on (-inf, -1]
    def f(w):
        return w * math.exp(w) - x

    if x < -0.25:
        p = -math.sqrt(2.0 * (1.0 + math.e * x))
        w = -1.0 + p - p * p / 3.0 + 11.0 / 72.0 * p ** 3
    else:
        l1 = math.log(-x)
        l2 = math.log(-l1)
        w = l1 - l2 + l2 / l1

    hi = -1.0
    lo = min(w, -1.0) - 1.0
    while f(lo) <= 0.0:
        lo = 2.0 * lo - 1.0
    w = min(max(w, lo), hi)

    for _ in range(max_iter):
        ew = math.exp(w)
        fw = w * ew - x
        if fw == 0.0:
            return w
        if fw > 0.0:
            lo = w
        else:
            hi = w
        wp1 = w + 1.0
        if wp1 != 0.0:
            denom = ew * wp1 - (w + 2.0) * fw / (2.0 * wp1)
            step = fw / denom if denom != 0.0 else math.inf
            w_new = w - step
            # converged Halley steps may land on a bracket end, so test first
            if abs(step) <= tol * abs(w):
                return w_new
        else:
            w_new = math.nan
        if not (lo < w_new < hi):
            w_new = 0.5 * (lo + hi)
        if abs(w_new - w) <= tol * abs(w_new):
            return w_new
        w = w_new
    return w


def erlang_pdf(x, n_antennas: int):
    """Density of the sum of ``n_antennas`` unit-mean exponential gains."""
    x = np.asarray(x, dtype=float)
    k = n_antennas
    with np.errstate(divide="ignore"):
        logpdf = (k - 1) * np.log(x) - x - math.lgamma(k)
    out = np.exp(logpdf)
    if k == 1:
        out = np.where(x >= 0, np.exp(-x), 0.0)
    return np.where(x >= 0, out, 0.0)


@lru_cache(maxsize=64)
def _laguerre_rule(n_nodes: int, n_antennas: int):
    nodes, weights = special.roots_genlaguerre(n_nodes, n_antennas - 1)
    # normalise by (N_r - 1)! so the weights integrate the Erlang density
    with np.errstate(divide="ignore"):  # far-tail weights underflow to 0
        weights = np.exp(np.log(weights) - math.lgamma(n_antennas))
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def _evaluate(integrand, xs):
    try:
        vals = np.asarray(integrand(xs), dtype=float)
        if vals.shape == xs.shape:
            return vals
    except (TypeError, ValueError):
        pass
    return np.array([float(integrand(float(v))) for v in xs])


def fading_expectation(
    integrand: Callable,
    n_antennas: int,
    *,
    nodes: int = 200,
    breakpoints: Optional[Iterable[float]] = None,
    tol: float = 1e-9,
) -> float:
    """E[h(g)] for g ~ Erlang(n_antennas, 1).

    A fixed generalized Gauss-Laguerre rule does the work; when it disagrees
    with a coarser rule by more than ``tol`` (relative for results below 1;
    sharp transitions, e.g. long blocklengths) the integral is redone
    adaptively, split at ``breakpoints``.
    """
    if int(n_antennas) != n_antennas or n_antennas < 1:
        raise DomainError(f"n_antennas must be a positive integer, got {n_antennas}")
    n_antennas = int(n_antennas)
    x, w = _laguerre_rule(nodes, n_antennas)
    fine = float(np.dot(w, _evaluate(integrand, x)))
    xc, wc = _laguerre_rule(max(nodes * 4 // 5, 20), n_antennas)
    coarse = float(np.dot(wc, _evaluate(integrand, xc)))
    if abs(fine - coarse) <= max(tol * min(1.0, abs(fine)), 1e-300):
        return fine
    return _adaptive_expectation(integrand, n_antennas, breakpoints)


def _adaptive_expectation(integrand, n_antennas, breakpoints):
    def scalar(v):
        return float(_evaluate(integrand, np.array([v]))[0]) * float(erlang_pdf(v, n_antennas))

    k = n_antennas
    upper = k + 40.0 * math.sqrt(k) + 60.0
    pts = sorted(
        {float(b) for b in (breakpoints or ()) if 0.0 < float(b) < upper}
        | {max(k - 1.0, 0.0) or 0.5}
    )
    edges = [0.0, *pts, upper]
    total = 0.0
    for a, b in zip(edges[:-1], edges[1:]):
        if b > a:
            val, _ = integrate.quad(scalar, a, b, limit=400, epsabs=1e-13, epsrel=1e-10)
            total += val
    tail, _ = integrate.quad(scalar, upper, math.inf, limit=200, epsabs=1e-14)
    return total + tail
