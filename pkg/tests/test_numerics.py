import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from erasure_regret.numerics import (
    BracketError,
    ConvergenceError,
    DomainError,
    Tolerance,
    binom_cdf,
    binom_pmf_vector,
    bisect_root,
    fit_loglog_slope,
    log_binom_pmf,
    q_func,
    q_inv,
)
from oracles import pmf_frac, q_inv_mp, q_mp


class TestQ:
    def test_at_zero(self):
        assert q_func(0.0) == 0.5

    def test_deep_tail(self):
        assert q_func(8.0) < 1e-14

    @pytest.mark.parametrize("x", [-6.0, -1.5, 0.3, 1.2816, 2.0, 5.0, 12.0, 30.0])
    def test_against_mpmath(self, x):
        assert q_func(x) == pytest.approx(q_mp(x), rel=1e-14)

    def test_near_tenth(self):
        assert q_func(1.2816) == pytest.approx(0.1, abs=1e-4)

    def test_rejects_nonfinite(self):
        for bad in (math.inf, -math.inf, math.nan):
            with pytest.raises(DomainError):
                q_func(bad)

    def test_strictly_decreasing(self):
        xs = np.linspace(-8, 8, 801)
        vals = [q_func(x) for x in xs]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    @given(st.floats(-30, 30))
    def test_symmetry(self, x):
        assert abs(q_func(x) + q_func(-x) - 1.0) <= 1e-12


class TestQInv:
    def test_half(self):
        assert q_inv(0.5) == 0.0

    @pytest.mark.parametrize("p", [1e-300, 1e-30, 1e-8, 0.01, 0.1, 0.3, 0.49, 0.7, 0.99, 1 - 1e-9])
    def test_against_mpmath(self, p):
        assert q_inv(p) == pytest.approx(q_inv_mp(p), rel=1e-10, abs=1e-10)

    def test_tenth(self):
        assert q_inv(0.1) == pytest.approx(1.2816, abs=1e-4)

    def test_round_trip_x(self):
        assert q_inv(q_func(2.0)) == pytest.approx(2.0, abs=1e-9)

    @given(st.floats(1e-12, 1 - 1e-12))
    def test_round_trip_p(self, p):
        assert q_func(q_inv(p)) == pytest.approx(p, rel=1e-10)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5])
    def test_domain(self, p):
        with pytest.raises(DomainError):
            q_inv(p)


class TestBinomial:
    def test_log_pmf_examples(self):
        assert log_binom_pmf(4, 2, 0.5) == pytest.approx(math.log(0.375), abs=1e-14)
        assert log_binom_pmf(0, 0, 0.3) == 0.0
        assert log_binom_pmf(1, 1, 0.3) == pytest.approx(math.log(0.3), abs=1e-15)

    def test_log_pmf_domain(self):
        with pytest.raises(DomainError):
            log_binom_pmf(3, 4, 0.5)
        with pytest.raises(DomainError):
            log_binom_pmf(3, 1, 1.0)

    @pytest.mark.parametrize("n,p", [(7, 0.3), (40, 0.5), (65, 0.11), (300, 0.8)])
    def test_pmf_vector_against_fractions(self, n, p):
        got = binom_pmf_vector(n, p)
        for k in range(n + 1):
            ref = float(pmf_frac(n, k, p))
            assert got[k] == pytest.approx(ref, rel=1e-11, abs=1e-300)

    @pytest.mark.parametrize("n", [1, 10, 333, 10_000])
    def test_log_pmf_sums_to_one(self, n):
        for p in (0.05, 0.5, 0.93):
            total = math.fsum(math.exp(log_binom_pmf(n, k, p)) for k in range(n + 1))
            assert total == pytest.approx(1.0, abs=1e-9)

    def test_cdf_examples(self):
        assert binom_cdf(4, 1, 0.5) == 0.3125
        assert binom_cdf(10, -1, 0.5) == 0.0
        assert binom_cdf(10, 10, 0.5) == 1.0

    def test_cdf_exact_small(self):
        n, p = 12, Fraction(3, 8)
        for k in range(n + 1):
            ref = sum(pmf_frac(n, j, p) for j in range(k + 1))
            assert binom_cdf(n, k, float(p)) == pytest.approx(float(ref), abs=1e-15)

    @settings(max_examples=40)
    @given(st.integers(1, 400), st.floats(0.01, 0.99))
    def test_cdf_monotone_and_matches_pmf(self, n, p):
        pmf = binom_pmf_vector(n, p)
        cdfs = [binom_cdf(n, k, p) for k in range(-1, n + 1)]
        assert all(a <= b for a, b in zip(cdfs, cdfs[1:]))
        for k in range(0, n, max(1, n // 7)):
            assert abs(cdfs[k + 1] - math.fsum(pmf[: k + 1])) <= 1e-12


class TestBisect:
    def test_linear(self):
        assert bisect_root(lambda x: x - 1.0, 0.0, 2.0) == pytest.approx(1.0, abs=1e-12)

    def test_sqrt2(self):
        assert bisect_root(lambda x: x * x - 2.0, 0.0, 2.0) == pytest.approx(math.sqrt(2), abs=1e-9)

    @given(st.floats(-50, 50), st.floats(0.1, 20))
    def test_swap_invariant(self, c, w):
        f = lambda x: x**3 - c
        lo, hi = -abs(c) - 1 - w, abs(c) + 1 + w
        assert bisect_root(f, lo, hi) == bisect_root(f, hi, lo)

    def test_no_sign_change(self):
        with pytest.raises(BracketError):
            bisect_root(lambda x: x * x + 1.0, -1.0, 1.0)

    def test_iteration_cap_carries_best(self):
        tol = Tolerance(abs_tol=1e-300, rel_tol=1e-300, max_iter=5)
        with pytest.raises(ConvergenceError) as info:
            bisect_root(lambda x: x - 0.3, 0.0, 1.0, tol)
        assert abs(info.value.best - 0.3) < 0.1

    def test_tolerance_validation(self):
        with pytest.raises(DomainError):
            Tolerance(abs_tol=0.0)
        with pytest.raises(DomainError):
            Tolerance(rel_tol=-1.0)
        with pytest.raises(DomainError):
            Tolerance(max_iter=0)


class TestSlope:
    def test_examples(self):
        assert fit_loglog_slope([(1, 1), (10, 10)]) == pytest.approx(1.0)
        assert fit_loglog_slope([(1, 2), (100, 2)]) == pytest.approx(0.0, abs=1e-15)
        assert fit_loglog_slope([(1, 1), (8, 4)]) == pytest.approx(2 / 3)

    @given(st.floats(-3, 3), st.floats(0.1, 10))
    def test_exact_power_law(self, a, c):
        pts = [(x, c * x**a) for x in (1.0, 3.0, 10.0, 70.0)]
        assert fit_loglog_slope(pts) == pytest.approx(a, abs=1e-9)

    def test_errors(self):
        with pytest.raises(DomainError):
            fit_loglog_slope([(1, 1)])
        with pytest.raises(DomainError):
            fit_loglog_slope([(1, 1), (2, 0)])
        with pytest.raises(DomainError):
            fit_loglog_slope([(2, 1), (2, 3)])
