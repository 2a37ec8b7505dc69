"""Throughput and regret of rate-adaptation strategies on a binary erasure
channel whose erasure probability is unknown and only observable through
occasional empirical-erasure-rate queries."""

from .ett import (
    EttConfig,
    EttReport,
    ErrorModel,
    N_exact_ppv,
    N_exact_step,
    N_thm5,
    backoff_for_eeff,
    eeff_exact_ppv,
    eeff_step_exact,
    eeff_step_gauss,
    joint_opt,
    opt_eeff,
    opt_Te,
    rate_decision,
)
from .fbl import BoundPair, Channel, CodePoint, eps_bounds, eps_lower, eps_upper, oracle_N, oracle_rate, regret
from .mc import SimConfig, SimReport, derive_trial_seed, simulate_ett, simulate_window
from .numerics import Tolerance, bisect_root, binom_cdf, fit_loglog_slope, log_binom_pmf, q_func, q_inv
from .windowing import (
    Schedule,
    WindowReport,
    geom_N_bounds,
    make_arithmetic,
    make_geometric,
    window_backoffs,
    window_N_exact,
    window_N_thm5,
)

__version__ = "0.1.0"
