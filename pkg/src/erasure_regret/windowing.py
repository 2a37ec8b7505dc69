"""Windowing strategies.

The horizon is cut into blocks T_1..T_M. Before block i the transmitter queries
the cumulative empirical erasure rate over the previous S_{i-1} bits and sends
at max(0, 1 - delta_hat - b_i), with b_i chosen so the Gaussian block error is
eeff. Block 1 has nothing to estimate from and carries no information.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from itertools import accumulate

from .ett import (
    EttConfig,
    ErrorModel,
    N_exact_ppv,
    backoff_for_eeff,
    eeff_exact,
    step_fraction,
    throughput_penalty_factor,
)
from .fbl import BoundPair, Channel
from .numerics import DomainError

GEOMETRIC = "geometric"
ARITHMETIC = "arithmetic"
CUSTOM = "custom"


@dataclass(frozen=True)
class Schedule:
    blocks: tuple[int, ...]
    kind: str = CUSTOM

    def __post_init__(self):
        if self.kind not in (GEOMETRIC, ARITHMETIC, CUSTOM):
            raise DomainError(f"unknown schedule kind {self.kind!r}")
        if len(self.blocks) < 2:
            raise DomainError(f"a schedule needs at least 2 blocks, got {len(self.blocks)}")
        if any(int(t) != t or t < 1 for t in self.blocks):
            raise DomainError(f"block lengths must be positive integers: {self.blocks}")
        if self.kind == GEOMETRIC and any(t != 2**i for i, t in enumerate(self.blocks)):
            raise DomainError(f"not a geometric schedule: {self.blocks}")

    @property
    def M(self) -> int:
        return len(self.blocks)

    @property
    def T(self) -> int:
        return sum(self.blocks)

    @property
    def prefix(self) -> list[int]:
        """S_{i-1} for each block: bits sent before it."""
        return [0, *accumulate(self.blocks)][:-1]


@dataclass(frozen=True)
class BlockTerm:
    S_prev: int
    b: float
    contribution: float


@dataclass(frozen=True)
class WindowReport:
    N_total: float
    per_block: tuple[BlockTerm, ...]
    queries: int


def make_geometric(M: int) -> Schedule:
    if not (2 <= M <= 40):
        raise DomainError(f"geometric schedule needs 2 <= M <= 40, got {M}")
    return Schedule(tuple(2**i for i in range(M)), GEOMETRIC)


def make_arithmetic(T: int, M: int) -> Schedule:
    """Blocks 1, 1+d, 1+2d, ... with d = 2(T - M) / (M(M - 1)).

    Each block is rounded to the nearest integer and the final block absorbs
    the rounding residual so the lengths sum to T exactly.
    """
    if M < 2:
        raise DomainError(f"arithmetic schedule needs M >= 2, got {M}")
    if T < M * (M + 1) // 2:
        raise DomainError(f"T={T} too small for an increasing {M}-block progression")
    d = 2.0 * (T - M) / (M * (M - 1))
    head = [math.floor(1.0 + i * d + 0.5) for i in range(M - 1)]
    last = T - sum(head)
    if last < 1:
        raise DomainError(f"rounding left no room for the last block (T={T}, M={M})")
    return Schedule(tuple(head + [last]), ARITHMETIC)


def make_custom(blocks) -> Schedule:
    return Schedule(tuple(int(b) for b in blocks), CUSTOM)


def window_backoffs(ch: Channel, s: Schedule, eeff: float) -> list[float]:
    """Per-block backoffs; the first block gets +inf (it never transmits)."""
    if not (0.0 < eeff <= 0.5):
        raise DomainError(f"eeff must be in (0, 0.5], got {eeff!r}")
    return [math.inf] + [backoff_for_eeff(ch, S, eeff) for S in s.prefix[1:]]


def _report(s: Schedule, backoffs, contributions) -> WindowReport:
    terms = tuple(
        BlockTerm(S, b, c) for S, b, c in zip(s.prefix, backoffs, contributions)
    )
    return WindowReport(math.fsum(contributions), terms, s.M - 1)


def _block_configs(s: Schedule, backoffs):
    """Blocks 2..M as equivalent one-shot configs (Te = S_{i-1}, Tt = T_i)."""
    return [
        EttConfig(S + T_i, S, b)
        for T_i, S, b in zip(s.blocks[1:], s.prefix[1:], backoffs[1:])
    ]


def window_N_exact(
    ch: Channel, s: Schedule, eeff: float, model: ErrorModel = ErrorModel.STEP
) -> WindowReport:
    """Expected decoded bits, exact in the binomial.

    Block i contributes T_i * F(b_i, S_{i-1}); only the marginal law of the
    cumulative erasure count matters, so blocks can be evaluated separately.
    ``model`` swaps the step error model for one of the bound-based ones.
    """
    backoffs = window_backoffs(ch, s, eeff)
    model = ErrorModel(model)
    if model is ErrorModel.STEP:
        contrib = [0.0] + [
            cfg.Tt * step_fraction(ch, cfg.Te, cfg.b) for cfg in _block_configs(s, backoffs)
        ]
    else:
        contrib = [0.0] + [N_exact_ppv(ch, cfg, model) for cfg in _block_configs(s, backoffs)]
    return _report(s, backoffs, contrib)


def window_eeff_exact(
    ch: Channel, s: Schedule, eeff: float, model: ErrorModel = ErrorModel.STEP
) -> float:
    """Mean block error over blocks 2..M, exact in the binomial."""
    cfgs = _block_configs(s, window_backoffs(ch, s, eeff))
    return math.fsum(eeff_exact(ch, cfg, model) for cfg in cfgs) / len(cfgs)


def window_N_thm5(ch: Channel, s: Schedule, eeff: float) -> WindowReport:
    """Closed-form throughput summed over blocks, each clamped at zero."""
    backoffs = window_backoffs(ch, s, eeff)
    lead = (1.0 - ch.delta) * (1.0 - eeff)
    g = throughput_penalty_factor(eeff)
    contrib = [0.0] + [
        T_i * max(0.0, lead - math.sqrt(ch.dispersion / S) * g)
        for T_i, S in zip(s.blocks[1:], s.prefix[1:])
    ]
    return _report(s, backoffs, contrib)


def geom_N_bounds(ch: Channel, M: int, eeff: float) -> BoundPair:
    """Closed-form lower/upper bounds on geometric-windowing throughput.

    T(1-delta)(1-eeff) - c * sqrt((T+1) v) * G / (sqrt(2) - 1), with c = 1 for
    the upper bound and c = sqrt(2) for the lower; T = 2^M - 1.
    """
    if M < 2:
        raise DomainError(f"M must be >= 2, got {M}")
    if not (0.0 < eeff <= 0.5):
        raise DomainError(f"eeff must be in (0, 0.5], got {eeff!r}")
    T = 2**M - 1
    lead = T * (1.0 - ch.delta) * (1.0 - eeff)
    corr = math.sqrt((T + 1) * ch.dispersion) * throughput_penalty_factor(eeff) / (math.sqrt(2.0) - 1.0)
    return BoundPair(lower=lead - math.sqrt(2.0) * corr, upper=lead - corr)
