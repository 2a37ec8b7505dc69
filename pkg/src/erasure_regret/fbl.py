"""Finite-blocklength error bounds for the binary erasure channel, the
known-delta oracle and the regret against it."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .numerics import DomainError, binom_log_pmf_vector, binom_pmf_vector, q_inv

_LN2 = math.log(2.0)
_BOUND_SLACK = 1e-12


class ConsistencyError(RuntimeError):
    """Computed quantities violate an ordering that must hold."""


@dataclass(frozen=True)
class Channel:
    """Binary erasure channel with erasure probability ``delta``."""

    delta: float

    def __post_init__(self):
        if not (0.0 < self.delta < 1.0):
            raise DomainError(f"erasure probability must be in (0, 1), got {self.delta!r}")

    @property
    def capacity(self) -> float:
        return 1.0 - self.delta

    @property
    def dispersion(self) -> float:
        return self.delta * (1.0 - self.delta)


@dataclass(frozen=True)
class CodePoint:
    n: int
    r: float

    def __post_init__(self):
        if self.n < 1:
            raise DomainError(f"blocklength must be >= 1, got {self.n}")
        if not (0.0 <= self.r <= 1.0):
            raise DomainError(f"rate must be in [0, 1], got {self.r!r}")


@dataclass(frozen=True)
class BoundPair:
    lower: float
    upper: float


def _redundancy(n: int, r: float) -> float:
    # n(1 - r), snapped to an integer when float noise puts it a hair off
    red = n * (1.0 - r)
    nearest = round(red)
    if abs(red - nearest) <= 1e-9 * max(1.0, n):
        return float(nearest)
    return red


def eps_upper(ch: Channel, cp: CodePoint) -> float:
    """Random-coding achievability bound on block error probability.

    sum_t P(t erasures) * 2^-[n(1-r) - t]^+
    """
    n = cp.n
    red = _redundancy(n, cp.r)
    t = np.arange(n + 1, dtype=float)
    terms = binom_pmf_vector(n, ch.delta) * np.exp2(-np.maximum(red - t, 0.0))
    return min(1.0, math.fsum(terms))


def eps_lower(ch: Channel, cp: CodePoint) -> float:
    """Converse bound on block error probability.

    sum over t > floor(n(1-r)) of P(t erasures) * (1 - 2^(n(1-r) - t))
    """
    n = cp.n
    red = _redundancy(n, cp.r)
    start = math.floor(red) + 1
    if start > n:
        return 0.0
    t = np.arange(start, n + 1, dtype=float)
    pmf = binom_pmf_vector(n, ch.delta)[start:]
    # -expm1(x ln2) = 1 - 2^x without cancellation near t = n(1-r)
    factor = -np.expm1((red - t) * _LN2)
    return min(1.0, max(0.0, math.fsum(pmf * factor)))


def eps_bounds(ch: Channel, cp: CodePoint) -> BoundPair:
    lo, hi = eps_lower(ch, cp), eps_upper(ch, cp)
    if lo > hi + _BOUND_SLACK:
        raise ConsistencyError(
            f"converse {lo:.17g} exceeds achievability {hi:.17g} at "
            f"delta={ch.delta}, n={cp.n}, r={cp.r}"
        )
    return BoundPair(lower=min(lo, hi), upper=hi)


def oracle_rate(ch: Channel, n: int, eeff: float) -> float:
    """Normal-approximation optimal rate at blocklength n and error eeff.

    The O(1)/n remainder is omitted. Clamped to [0, 1].
    """
    if n < 1:
        raise DomainError(f"blocklength must be >= 1, got {n}")
    r = ch.capacity - math.sqrt(ch.dispersion / n) * q_inv(eeff)
    return min(1.0, max(0.0, r))


def oracle_N(ch: Channel, T: int, eeff: float) -> float:
    """Expected decoded bits of the known-delta oracle over horizon T."""
    return T * oracle_rate(ch, T, eeff) * (1.0 - eeff)


def regret(n_strategy: float, n_oracle: float) -> float:
    if not (math.isfinite(n_strategy) and math.isfinite(n_oracle)):
        raise DomainError("regret needs finite inputs")
    return n_oracle - n_strategy


class BoundTable:
    """Both error bounds at a fixed blocklength, for many rates at once.

    Precomputes prefix/suffix log-sum-exp tables of pmf(t) * 2^(+-t) so each
    rate costs O(1) instead of O(n). Used by the expectation evaluators,
    which need the bounds at every possible estimated rate.
    """

    def __init__(self, ch: Channel, n: int):
        if n < 1:
            raise DomainError(f"blocklength must be >= 1, got {n}")
        self.n = n
        logpmf = binom_log_pmf_vector(n, ch.delta)
        t = np.arange(n + 1, dtype=float)
        pmf = np.exp(logpmf)
        # tail[m] = P(T >= m), m = 0..n+1
        self._tail = np.concatenate([np.cumsum(pmf[::-1])[::-1], [0.0]])
        # head_up[m] = log sum_{t < m} pmf(t) 2^t, m = 0..n+1
        self._head_up = np.concatenate(
            [[-np.inf], np.logaddexp.accumulate(logpmf + t * _LN2)]
        )
        # tail_dn[m] = log sum_{t >= m} pmf(t) 2^-t, m = 0..n+1
        self._tail_dn = np.concatenate(
            [np.logaddexp.accumulate((logpmf - t * _LN2)[::-1])[::-1], [-np.inf]]
        )

    def _red(self, rates) -> np.ndarray:
        red = self.n * (1.0 - np.asarray(rates, dtype=float))
        nearest = np.round(red)
        return np.where(np.abs(red - nearest) <= 1e-9 * max(1.0, self.n), nearest, red)

    def upper(self, rates) -> np.ndarray:
        red = self._red(rates)
        m = np.clip(np.ceil(red).astype(np.int64), 0, self.n + 1)
        val = self._tail[m] + np.exp(self._head_up[m] - red * _LN2)
        return np.clip(val, 0.0, 1.0)

    def lower(self, rates) -> np.ndarray:
        red = self._red(rates)
        m = np.clip(np.floor(red).astype(np.int64) + 1, 0, self.n + 1)
        val = self._tail[m] - np.exp(self._tail_dn[m] + red * _LN2)
        return np.clip(val, 0.0, 1.0)
