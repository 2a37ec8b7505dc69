"""Special functions, binomial kernels, bisection and log-log slope fitting.

Everything here is a pure function; the other modules build on these.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import NormalDist
from typing import Callable, Iterable

import numpy as np
from scipy.special import gammaln

_STD_NORMAL = NormalDist()
_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class BracketError(ValueError):
    """The root-finding bracket does not straddle a sign change."""


class ConvergenceError(RuntimeError):
    """An iterative solver hit its iteration cap.

    ``best`` holds the last (best) iterate.
    """

    def __init__(self, message: str, best: float):
        super().__init__(message)
        self.best = best


@dataclass(frozen=True)
class Tolerance:
    abs_tol: float = 1e-12
    rel_tol: float = 1e-10
    max_iter: int = 200

    def __post_init__(self):
        if not self.abs_tol > 0:
            raise DomainError(f"abs_tol must be > 0, got {self.abs_tol}")
        if not self.rel_tol > 0:
            raise DomainError(f"rel_tol must be > 0, got {self.rel_tol}")
        if self.max_iter < 1:
            raise DomainError(f"max_iter must be >= 1, got {self.max_iter}")


DEFAULT_TOL = Tolerance()


def normal_pdf(x: float) -> float:
    return math.exp(-0.5 * x * x) / _SQRT2PI


def q_func(x: float) -> float:
    """Gaussian tail probability Q(x) = 1 - Phi(x)."""
    if not math.isfinite(x):
        raise DomainError(f"q_func needs a finite argument, got {x!r}")
    return 0.5 * math.erfc(x / _SQRT2)


def q_inv(p: float) -> float:
    """Inverse of :func:`q_func` on (0, 1).

    Starts from the stdlib normal quantile and polishes with Newton steps on
    log Q, which stays well conditioned deep in either tail.
    """
    if not (0.0 < p < 1.0):
        raise DomainError(f"q_inv needs 0 < p < 1, got {p!r}")
    if p > 0.5:
        return -q_inv(1.0 - p)
    if p == 0.5:
        return 0.0
    x = -_STD_NORMAL.inv_cdf(p)
    log_p = math.log(p)
    for _ in range(8):
        qx = q_func(x)
        if qx <= 0.0:
            break
        step = (math.log(qx) - log_p) * qx / normal_pdf(x)
        x += step
        if abs(step) <= 1e-15 * max(1.0, abs(x)):
            break
    return x


def log_binom_pmf(n: int, k: int, p: float) -> float:
    """log P(K = k) for K ~ Bin(n, p), via log-gamma."""
    if not (0 <= k <= n):
        raise DomainError(f"log_binom_pmf needs 0 <= k <= n, got n={n}, k={k}")
    if not (0.0 < p < 1.0):
        raise DomainError(f"log_binom_pmf needs 0 < p < 1, got {p!r}")
    return (
        math.lgamma(n + 1)
        - math.lgamma(k + 1)
        - math.lgamma(n - k + 1)
        + k * math.log(p)
        + (n - k) * math.log1p(-p)
    )


def binom_log_pmf_vector(n: int, p: float) -> np.ndarray:
    """Log pmf of Bin(n, p) at k = 0..n as an array."""
    if n < 0:
        raise DomainError(f"n must be >= 0, got {n}")
    if not (0.0 < p < 1.0):
        raise DomainError(f"need 0 < p < 1, got {p!r}")
    k = np.arange(n + 1, dtype=float)
    return (
        gammaln(n + 1.0)
        - gammaln(k + 1.0)
        - gammaln(n - k + 1.0)
        + k * math.log(p)
        + (n - k) * math.log1p(-p)
    )


# below this n the pmf is formed directly as comb(n, k) p^k (1-p)^(n-k), which
# is exact for dyadic p and avoids the log-domain round trip
_DIRECT_PMF_MAX_N = 64


def binom_pmf_vector(n: int, p: float) -> np.ndarray:
    """Pmf of Bin(n, p) at k = 0..n as an array."""
    if 0 <= n <= _DIRECT_PMF_MAX_N and 0.0 < p < 1.0:
        q = 1.0 - p
        return np.array([float(math.comb(n, k)) * p**k * q ** (n - k) for k in range(n + 1)])
    return np.exp(binom_log_pmf_vector(n, p))


def binom_cdf(n: int, k: int, p: float) -> float:
    """P(K <= k) for K ~ Bin(n, p) by exact compensated summation."""
    if not (0.0 < p < 1.0):
        raise DomainError(f"binom_cdf needs 0 < p < 1, got {p!r}")
    if k < 0:
        return 0.0
    if k >= n:
        return 1.0
    return min(1.0, math.fsum(binom_pmf_vector(n, p)[: k + 1]))


def bisect_root(
    f: Callable[[float], float],
    lo: float,
    hi: float,
    tol: Tolerance = DEFAULT_TOL,
) -> float:
    """Root of a monotone ``f`` on [lo, hi] by plain bisection.

    The endpoints may be given in either order. Stops once |f(mid)| <= abs_tol
    or the bracket is narrower than abs_tol + rel_tol * |mid|.
    """
    a, b = (lo, hi) if lo <= hi else (hi, lo)
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if (fa > 0) == (fb > 0):
        raise BracketError(
            f"no sign change on [{a}, {b}]: f(a)={fa:.6g}, f(b)={fb:.6g}"
        )
    mid = 0.5 * (a + b)
    for _ in range(tol.max_iter):
        mid = 0.5 * (a + b)
        fm = f(mid)
        if abs(fm) <= tol.abs_tol:
            return mid
        if (fm > 0) == (fa > 0):
            a, fa = mid, fm
        else:
            b = mid
        if b - a <= tol.abs_tol + tol.rel_tol * abs(mid):
            return 0.5 * (a + b)
    raise ConvergenceError(
        f"bisection did not converge in {tol.max_iter} iterations", best=mid
    )


def fit_loglog_slope(points: Iterable[tuple[float, float]]) -> float:
    """Least-squares slope of log y against log x."""
    pts = list(points)
    if len(pts) < 2:
        raise DomainError("need at least two points to fit a slope")
    xy = np.asarray(pts, dtype=float)
    if not np.all(xy > 0):
        raise DomainError("log-log fit needs strictly positive coordinates")
    lx, ly = np.log(xy[:, 0]), np.log(xy[:, 1])
    lx_c = lx - lx.mean()
    denom = float(np.dot(lx_c, lx_c))
    if denom == 0.0:
        raise DomainError("all x coordinates are equal; slope undefined")
    return float(np.dot(lx_c, ly - ly.mean()) / denom)
