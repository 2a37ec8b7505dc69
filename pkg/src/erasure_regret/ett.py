"""Estimate-then-Transmit: send Te pilot bits, query the empirical erasure
rate once, then transmit the remaining Tt bits at rate max(0, 1 - K/Te - b).

Three families of evaluators live here:

* exact expectations over K ~ Bin(Te, delta), using either the step error
  model or the finite-blocklength bounds from :mod:`fbl`;
* the Gaussian closed forms for the step model (error rate Q(b sqrt(Te/v))
  and the matching throughput expression);
* optimizers for the pilot length, the operating error rate, and both jointly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .fbl import BoundTable, Channel, oracle_N, regret
from .numerics import (
    DEFAULT_TOL,
    BracketError,
    DomainError,
    Tolerance,
    binom_cdf,
    binom_pmf_vector,
    bisect_root,
    normal_pdf,
    q_func,
    q_inv,
)


class NoSolutionError(ValueError):
    """An optimality equation has no root in its admissible bracket."""


class ErrorModel(str, enum.Enum):
    STEP = "step"
    PPV_UPPER = "ppv_upper"
    PPV_LOWER = "ppv_lower"
    PPV_MID = "ppv_mid"


@dataclass(frozen=True)
class EttConfig:
    T: int
    Te: int
    b: float = 0.0

    def __post_init__(self):
        if not (1 <= self.Te < self.T):
            raise DomainError(f"need 1 <= Te < T, got Te={self.Te}, T={self.T}")
        if not (self.b >= 0.0) or not math.isfinite(self.b):
            raise DomainError(f"backoff must be finite and >= 0, got {self.b!r}")

    @property
    def Tt(self) -> int:
        return self.T - self.Te


@dataclass(frozen=True)
class EttReport:
    eeff_exact: float
    eeff_gauss: float
    N_exact: float
    N_thm5: float
    N_ppv_lower: float
    N_ppv_upper: float
    regret_step: float


@dataclass(frozen=True)
class EeffOptimum:
    """Result of :func:`opt_eeff`.

    ``interior`` is False when no positive backoff improves throughput; the
    optimum then sits on the b = 0 boundary (eeff = 1/2).
    """

    eeff: float
    x: float
    interior: bool


@dataclass(frozen=True)
class JointOptimum:
    Te: int
    eeff: float
    N: float
    converged: bool
    rounds: int


def _snap(x: float) -> float:
    nearest = round(x)
    if abs(x - nearest) <= 1e-9 * max(1.0, abs(x)):
        return float(nearest)
    return x


def rate_decision(Te: int, k: int, b: float) -> float:
    if not (0 <= k <= Te):
        raise DomainError(f"need 0 <= k <= Te, got k={k}, Te={Te}")
    return max(0.0, 1.0 - k / Te - b)


def _rates(Te: int, b: float) -> np.ndarray:
    return np.maximum(0.0, 1.0 - np.arange(Te + 1) / Te - b)


def min_success_count(ch: Channel, Te: int, b: float) -> int:
    """Smallest erasure count K for which the chosen rate is <= 1 - delta.

    Under the step model a block is decoded iff K >= Te (delta - b); the
    boundary K = Te (delta - b) counts as success.
    """
    return max(0, math.ceil(_snap(Te * (ch.delta - b))))


def eeff_step_exact(ch: Channel, Te: int, b: float) -> float:
    """P(K < Te (delta - b)) for K ~ Bin(Te, delta)."""
    if Te < 1:
        raise DomainError(f"Te must be >= 1, got {Te}")
    return binom_cdf(Te, min_success_count(ch, Te, b) - 1, ch.delta)


def eeff_step_gauss(ch: Channel, Te: int, b: float) -> float:
    if Te < 1:
        raise DomainError(f"Te must be >= 1, got {Te}")
    return q_func(b * math.sqrt(Te / ch.dispersion))


def backoff_for_eeff(ch: Channel, Te: int, eeff: float) -> float:
    """Backoff that makes the Gaussian error rate equal ``eeff``."""
    if not (0.0 < eeff <= 0.5):
        raise DomainError(f"eeff must be in (0, 0.5] (backoff >= 0), got {eeff!r}")
    if Te < 1:
        raise DomainError(f"Te must be >= 1, got {Te}")
    return math.sqrt(ch.dispersion / Te) * q_inv(eeff)


def step_fraction(ch: Channel, Te: int, b: float) -> float:
    """Expected decoded bits per transmitted bit under the step model.

    Sum of (1 - k/Te - b) pmf(k) over ceil(Te(delta-b)) <= k <= floor(Te(1-b)).
    """
    k_lo = min_success_count(ch, Te, b)
    k_hi = math.floor(_snap(Te * (1.0 - b)))
    if k_lo > k_hi or k_hi < 0:
        return 0.0
    k_hi = min(k_hi, Te)
    pmf = binom_pmf_vector(Te, ch.delta)[k_lo : k_hi + 1]
    r = np.maximum(0.0, 1.0 - np.arange(k_lo, k_hi + 1) / Te - b)
    return math.fsum(pmf * r)


def N_exact_step(ch: Channel, cfg: EttConfig) -> float:
    return cfg.Tt * step_fraction(ch, cfg.Te, cfg.b)


def _bound_errors(ch: Channel, cfg: EttConfig, which: ErrorModel) -> np.ndarray:
    """Per-k error probability of the transmission block under ``which``."""
    which = ErrorModel(which)
    rates = _rates(cfg.Te, cfg.b)
    if which is ErrorModel.STEP:
        k = np.arange(cfg.Te + 1)
        return (k < min_success_count(ch, cfg.Te, cfg.b)).astype(float)
    table = BoundTable(ch, cfg.Tt)
    if which is ErrorModel.PPV_UPPER:
        return table.upper(rates)
    if which is ErrorModel.PPV_LOWER:
        return table.lower(rates)
    return 0.5 * (table.upper(rates) + table.lower(rates))


def eeff_exact(ch: Channel, cfg: EttConfig, which: ErrorModel = ErrorModel.STEP) -> float:
    """Average block error of the transmission phase under any error model."""
    pmf = binom_pmf_vector(cfg.Te, ch.delta)
    return min(1.0, math.fsum(pmf * _bound_errors(ch, cfg, which)))


def eeff_exact_ppv(ch: Channel, cfg: EttConfig, which: ErrorModel) -> float:
    """Average block error of the transmission phase, bounds as error model."""
    which = ErrorModel(which)
    if which not in (ErrorModel.PPV_UPPER, ErrorModel.PPV_LOWER):
        raise DomainError(f"eeff_exact_ppv takes ppv_upper or ppv_lower, got {which.value}")
    return eeff_exact(ch, cfg, which)


def N_exact_ppv(ch: Channel, cfg: EttConfig, which: ErrorModel) -> float:
    """Expected decoded bits with ``which`` as the block error model.

    With ppv_upper (the achievability bound) this is a lower bound on the
    throughput; with ppv_lower (the converse) an upper bound.
    """
    pmf = binom_pmf_vector(cfg.Te, ch.delta)
    rates = _rates(cfg.Te, cfg.b)
    err = _bound_errors(ch, cfg, which)
    return cfg.Tt * math.fsum(pmf * (1.0 - err) * rates)


def N_thm5(ch: Channel, cfg: EttConfig) -> float:
    """Gaussian closed form for the step-model throughput.

    Tt * ((1 - delta - b)(1 - eeff) - sqrt(v / (2 pi Te)) exp(-x^2 / 2)), with
    x = b sqrt(Te / v) = Q^-1(eeff). Can be negative for tiny Te.
    """
    v = ch.dispersion
    x = cfg.b * math.sqrt(cfg.Te / v)
    eeff = q_func(x)
    return cfg.Tt * (
        (1.0 - ch.delta - cfg.b) * (1.0 - eeff)
        - math.sqrt(v / (2.0 * math.pi * cfg.Te)) * math.exp(-0.5 * x * x)
    )


def N_thm5_at_eeff(ch: Channel, T: int, Te: int, eeff: float) -> float:
    return N_thm5(ch, EttConfig(T, Te, backoff_for_eeff(ch, Te, eeff)))


def throughput_penalty_factor(eeff: float) -> float:
    """Q^-1(e)(1 - e) + phi(Q^-1(e)): the per-sqrt(v/Te) throughput loss."""
    x = q_inv(eeff)
    return x * (1.0 - eeff) + normal_pdf(x)


def te_residual(ch: Channel, T: float, eeff: float, Te: float) -> float:
    """d/dTe of the closed-form throughput at fixed eeff, up to sign and scale.

    (T + Te)/2 * Te^-3/2 * sqrt(v) * G(eeff) - (1 - delta)(1 - eeff), with G
    from :func:`throughput_penalty_factor`. Strictly decreasing in Te; its
    root is the exact maximizer of :func:`N_thm5_at_eeff` over continuous Te.
    """
    g = throughput_penalty_factor(eeff)
    lhs = 0.5 * (T + Te) * Te**-1.5 * math.sqrt(ch.dispersion) * g
    return lhs - (1.0 - ch.delta) * (1.0 - eeff)


def te_residual_frozen_backoff(ch: Channel, T: float, eeff: float, Te: float) -> float:
    """Optimality residual obtained by differentiating with b held constant.

    LHS = (T + Te)/2 * sqrt(v / (2 pi Te^3)) * exp(-x^2/2)
    RHS = (1 - delta - sqrt(v/Te) x)(1 - eeff),  x = Q^-1(eeff).
    Same root as :func:`te_residual` at eeff = 1/2 only; below that it
    undershoots the true maximizer.
    """
    v = ch.dispersion
    x = q_inv(eeff)
    lhs = 0.5 * (T + Te) * math.sqrt(v / (2.0 * math.pi * Te**3)) * math.exp(-0.5 * x * x)
    rhs = (1.0 - ch.delta - math.sqrt(v / Te) * x) * (1.0 - eeff)
    return lhs - rhs


def opt_Te(ch: Channel, T: int, eeff: float, tol: Tolerance = DEFAULT_TOL) -> int:
    """Pilot length maximizing the closed-form throughput at fixed eeff.

    Solves :func:`te_residual` = 0 by bisection over continuous Te in
    [2, T-1], then returns whichever neighbouring integer scores higher.
    """
    if T < 4:
        raise DomainError(f"T must be >= 4, got {T}")
    if not (0.0 < eeff <= 0.5):
        raise DomainError(f"eeff must be in (0, 0.5], got {eeff!r}")
    try:
        te = bisect_root(lambda t: te_residual(ch, T, eeff, t), 2.0, T - 1.0, tol)
    except BracketError as exc:
        raise NoSolutionError(
            f"no optimal pilot length for delta={ch.delta}, T={T}, eeff={eeff}"
        ) from exc
    candidates = sorted({min(T - 1, max(1, math.floor(te))), min(T - 1, max(1, math.ceil(te)))})
    return max(candidates, key=lambda c: (N_thm5_at_eeff(ch, T, c, eeff), -c))


def eeff_residual(ch: Channel, Te: int, x: float) -> float:
    """LHS - RHS of the operating-point optimality equation at x = Q^-1(eeff).

    (1 - delta) exp(-x^2/2) sqrt(Te / (2 pi v)) - (1 - Q(x)).
    """
    lhs = (1.0 - ch.delta) * math.exp(-0.5 * x * x) * math.sqrt(Te / (2.0 * math.pi * ch.dispersion))
    return lhs - q_func(-x)


def opt_eeff(ch: Channel, Te: int, tol: Tolerance = DEFAULT_TOL) -> EeffOptimum:
    if Te < 2:
        raise DomainError(f"Te must be >= 2, got {Te}")
    if eeff_residual(ch, Te, 0.0) <= 0.0:
        return EeffOptimum(eeff=0.5, x=0.0, interior=False)
    x = bisect_root(lambda x: eeff_residual(ch, Te, x), 0.0, 40.0, tol)
    return EeffOptimum(eeff=q_func(x), x=x, interior=True)


def joint_opt(ch: Channel, T: int, tol: Tolerance = DEFAULT_TOL, max_rounds: int = 100) -> JointOptimum:
    """Alternate the two optimality conditions until they agree.

    Starts at eeff = 1/2. If the iteration does not settle within
    ``max_rounds`` (or a pilot-length solve fails midway), the best iterate
    seen, by closed-form throughput, is returned with ``converged=False``.
    """
    if T < 16:
        raise DomainError(f"T must be >= 16, got {T}")
    eeff = 0.5
    Te = None
    best: JointOptimum | None = None
    for rnd in range(1, max_rounds + 1):
        try:
            new_Te = opt_Te(ch, T, eeff, tol)
        except NoSolutionError:
            break
        new_eeff = opt_eeff(ch, new_Te, tol).eeff
        N = N_thm5_at_eeff(ch, T, new_Te, new_eeff)
        if best is None or N > best.N:
            best = JointOptimum(new_Te, new_eeff, N, False, rnd)
        if Te is not None and new_Te == Te and abs(new_eeff - eeff) <= tol.rel_tol * eeff:
            return JointOptimum(new_Te, new_eeff, N, True, rnd)
        Te, eeff = new_Te, new_eeff
    if best is None:
        raise NoSolutionError(f"no feasible pilot length for delta={ch.delta}, T={T}")
    return best


def ett_report(ch: Channel, cfg: EttConfig) -> EttReport:
    """All evaluators at one configuration.

    The regret is taken against the oracle running at the Gaussian error rate
    of ``cfg``.
    """
    eeff_gauss = eeff_step_gauss(ch, cfg.Te, cfg.b)
    n_exact = N_exact_step(ch, cfg)
    n_lo = N_exact_ppv(ch, cfg, ErrorModel.PPV_UPPER)
    n_hi = N_exact_ppv(ch, cfg, ErrorModel.PPV_LOWER)
    n_oracle = oracle_N(ch, cfg.T, max(eeff_gauss, 1e-300))
    return EttReport(
        eeff_exact=eeff_step_exact(ch, cfg.Te, cfg.b),
        eeff_gauss=eeff_gauss,
        N_exact=n_exact,
        N_thm5=N_thm5(ch, cfg),
        N_ppv_lower=n_lo,
        N_ppv_upper=n_hi,
        regret_step=regret(n_exact, n_oracle),
    )
