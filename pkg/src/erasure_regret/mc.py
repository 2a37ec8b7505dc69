"""Seeded Monte Carlo over bit-level erasure sample paths.

Randomness is counter based: trial ``i`` gets the seed
``derive_trial_seed(master, i)`` and its j-th uniform is the SplitMix64 output
for that seed after j+1 increments. Every draw is therefore a pure function of
(master, trial, counter), so results do not depend on how trials are chunked
or how many workers run them.

Counter layout per trial: 0..T-1 are the channel erasure draws, T+i is the
decoding draw for block i (used only by the bound-based error models).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ett import EttConfig, ErrorModel, min_success_count
from .fbl import BoundTable, Channel
from .numerics import DomainError
from .windowing import Schedule, window_backoffs

_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15
_M1 = 0xBF58476D1CE4E5B9
_M2 = 0x94D049BB133111EB
# cap on uint64 draws held per chunk (~32 MiB)
_CHUNK_DRAWS = 1 << 22


@dataclass(frozen=True)
class SimConfig:
    trials: int
    master_seed: int = 0
    error_model: ErrorModel = ErrorModel.STEP

    def __post_init__(self):
        if self.trials < 1:
            raise DomainError(f"trials must be >= 1, got {self.trials}")
        object.__setattr__(self, "error_model", ErrorModel(self.error_model))


@dataclass(frozen=True)
class SimReport:
    mean_N: float
    stderr_N: float
    empirical_eeff: float
    stderr_eeff: float
    trials: int


def _mix64(z: int) -> int:
    z = ((z ^ (z >> 30)) * _M1) & _MASK64
    z = ((z ^ (z >> 27)) * _M2) & _MASK64
    return z ^ (z >> 31)


def derive_trial_seed(master: int, index: int) -> int:
    """SplitMix64 finalizer of master + (index + 1) * golden-gamma (mod 2^64).

    The finalizer is a bijection and the golden gamma is odd, so distinct
    indices below 2^64 give distinct seeds for a fixed master.
    """
    return _mix64((master + (index + 1) * _GOLDEN) & _MASK64)


def _mix64_np(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * np.uint64(_M1)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(_M2)
    return z ^ (z >> np.uint64(31))


def _trial_seeds(master: int, start: int, stop: int) -> np.ndarray:
    idx = np.arange(start + 1, stop + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix64_np(np.uint64(master & _MASK64) + idx * np.uint64(_GOLDEN))


def _uniforms(seeds: np.ndarray, lo: int, hi: int) -> np.ndarray:
    """Uniforms in [0, 1) at counters lo..hi-1 for each trial seed (rows)."""
    ctr = np.arange(lo + 1, hi + 1, dtype=np.uint64) * np.uint64(_GOLDEN)
    with np.errstate(over="ignore"):
        z = _mix64_np(seeds[:, None] + ctr[None, :])
    return (z >> np.uint64(11)).astype(np.float64) * 2.0**-53


def _erasure_counts(seeds: np.ndarray, delta: float, blocks) -> np.ndarray:
    """Erasures per block, shape (trials, M), from bit-by-bit draws."""
    T = int(sum(blocks))
    erased = _uniforms(seeds, 0, T) < delta
    starts = np.concatenate([[0], np.cumsum(blocks)[:-1]]).astype(np.intp)
    return np.add.reduceat(erased, starts, axis=1)


class _BlockPlan:
    """Decision rule for one transmission block that follows S bits of history."""

    def __init__(self, ch: Channel, S: int, length: int, b: float, model: ErrorModel):
        self.S = S
        self.length = length
        self.b = b
        self.model = model
        self.k_min = min_success_count(ch, S, b)
        self.table = None if model is ErrorModel.STEP else BoundTable(ch, length)

    def play(self, K: np.ndarray, u: np.ndarray | None):
        """Payoff and error indicator per trial given cumulative erasures K."""
        rate = np.maximum(0.0, 1.0 - K / self.S - self.b)
        if self.model is ErrorModel.STEP:
            error = K < self.k_min
        else:
            up, lo = self.table.upper(rate), self.table.lower(rate)
            eps = {ErrorModel.PPV_UPPER: up, ErrorModel.PPV_LOWER: lo}.get(self.model)
            if eps is None:
                eps = 0.5 * (up + lo)
            error = u >= 1.0 - np.clip(eps, 0.0, 1.0)
        payoff = np.where(error, 0.0, self.length * rate)
        return payoff, error


def _run_chunk(ch, blocks, plans, master, start, stop):
    seeds = _trial_seeds(master, start, stop)
    counts = _erasure_counts(seeds, ch.delta, blocks)
    cum = np.cumsum(counts, axis=1)
    T = int(sum(blocks))
    payoff = np.zeros(stop - start)
    errors = np.zeros(stop - start)
    for i, plan in plans:
        u = None if plan.table is None else _uniforms(seeds, T + i, T + i + 1)[:, 0]
        p, e = plan.play(cum[:, i - 1], u)
        payoff += p
        errors += e
    return payoff, errors / len(plans)


def _simulate(ch: Channel, blocks, backoffs, sim: SimConfig, workers: int) -> SimReport:
    prefix = np.concatenate([[0], np.cumsum(blocks)[:-1]])
    plans = [
        (i, _BlockPlan(ch, int(prefix[i]), int(blocks[i]), backoffs[i], sim.error_model))
        for i in range(1, len(blocks))
    ]
    per_chunk = max(1, _CHUNK_DRAWS // (int(sum(blocks)) + len(blocks)))
    bounds = [(s, min(s + per_chunk, sim.trials)) for s in range(0, sim.trials, per_chunk)]
    master = sim.master_seed & _MASK64
    if workers > 1 and len(bounds) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(lambda se: _run_chunk(ch, blocks, plans, master, *se), bounds))
    else:
        parts = [_run_chunk(ch, blocks, plans, master, s, e) for s, e in bounds]
    payoff = np.concatenate([p for p, _ in parts])
    err = np.concatenate([e for _, e in parts])
    return _summarize(payoff, err)


def _mean_stderr(x: np.ndarray) -> tuple[float, float]:
    n = len(x)
    mean = math.fsum(x) / n
    if n < 2:
        return mean, 0.0
    var = math.fsum((x - mean) ** 2) / (n - 1)
    return mean, math.sqrt(var / n)


def _summarize(payoff: np.ndarray, err: np.ndarray) -> SimReport:
    mean_n, se_n = _mean_stderr(payoff)
    mean_e, se_e = _mean_stderr(err)
    return SimReport(mean_n, se_n, min(1.0, max(0.0, mean_e)), se_e, len(payoff))


def simulate_ett(ch: Channel, cfg: EttConfig, sim: SimConfig, workers: int = 1) -> SimReport:
    """Estimate-then-Transmit: Te pilot bits, one query, one transmission block.

    ``empirical_eeff`` is the fraction of trials whose transmission block
    failed. Under the step model a zero-rate block never fails.
    """
    return _simulate(ch, (cfg.Te, cfg.Tt), [math.inf, cfg.b], sim, workers)


def simulate_window(
    ch: Channel, s: Schedule, eeff: float, sim: SimConfig, workers: int = 1
) -> SimReport:
    """Windowing over one erasure sample path per trial.

    ``empirical_eeff`` averages, per trial, the fraction of blocks 2..M in
    error, then across trials; its stderr is therefore trial-clustered.
    """
    return _simulate(ch, s.blocks, window_backoffs(ch, s, eeff), sim, workers)
