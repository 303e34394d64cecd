import math
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from scaled_poisson import (
    ValidationError,
    normal_tail,
    poisson_cdf,
    poisson_log_pmf,
    poisson_pmf,
    poisson_tail,
    regularized_gamma_q,
)

from oracles import mp_gamma_q, mp_normal_tail, mp_poisson_pmf, mp_poisson_tail

RATES = [Fraction(1, 2), Fraction(1), Fraction(9, 5), Fraction(1600, 31)]


class TestLogPmf:
    def test_at_zero_is_minus_rate(self):
        assert poisson_log_pmf(1, 0) == -1.0

    def test_frozen_value_rate_9_5_count_2(self):
        # log(0.5 * 1.8^2 * e^-1.8), high-precision reference
        assert poisson_log_pmf(Fraction(9, 5), 2) == pytest.approx(
            -1.317573850755707293, rel=1e-14
        )

    def test_matches_normalized_table_entry(self):
        # brute-force 200-term pmf table, normalized to its own mass
        rate = Fraction(1600, 31)
        table = [float(mp_poisson_pmf(rate, j)) for j in range(200)]
        total = sum(table)
        assert total == pytest.approx(1.0, abs=1e-15)
        got = math.exp(poisson_log_pmf(rate, 51))
        assert got == pytest.approx(table[51] / total, rel=1e-12)

    def test_always_nonpositive_and_roundtrip(self):
        for rate in RATES:
            for j in range(0, 120, 7):
                lp = poisson_log_pmf(rate, j)
                assert lp <= 0.0
                p = math.exp(lp)
                assert 0.0 <= p <= 1.0
                if p > 1e-300:
                    assert math.log(p) == pytest.approx(lp, rel=1e-14, abs=1e-13)

    @given(
        rate=st.fractions(min_value=Fraction(1, 10), max_value=Fraction(200), max_denominator=97),
        j=st.integers(min_value=1, max_value=200),
    )
    @settings(max_examples=150, deadline=None)
    def test_one_step_recurrence(self, rate, j):
        # rate * pmf(j-1) = j * pmf(j)
        lhs = float(rate) * poisson_pmf(rate, j - 1)
        rhs = j * poisson_pmf(rate, j)
        if rhs > 1e-290:
            assert lhs == pytest.approx(rhs, rel=1e-12)

    def test_recurrence_identity_on_stated_grid(self):
        # full accuracy holds down to the subnormal boundary; below ~1e-290
        # the linear-scale values themselves degrade
        for rate in RATES:
            for j in range(1, 201):
                lhs = float(rate) * poisson_pmf(rate, j - 1)
                rhs = j * poisson_pmf(rate, j)
                if rhs > 1e-290:
                    assert abs(lhs / rhs - 1) < 1e-12

    def test_domain_errors(self):
        with pytest.raises(ValidationError):
            poisson_log_pmf(0, 1)
        with pytest.raises(ValidationError):
            poisson_log_pmf(-2.0, 1)
        with pytest.raises(ValidationError):
            poisson_log_pmf(1.0, -1)


class TestTail:
    def test_full_support(self):
        assert poisson_tail(1, 0) == 1.0

    def test_frozen_two_term_value(self):
        # 1 - e^-1.8 (1 + 1.8)
        assert poisson_tail(Fraction(9, 5), 2) == pytest.approx(
            0.53716311297955769277, rel=1e-13
        )

    def test_deep_tail_against_brute_force(self):
        got = poisson_tail(Fraction(1600, 31), 100)
        assert 0 < got < 1e-8
        assert got == pytest.approx(1.5738514959986450403e-9, rel=1e-10)

    def test_extreme_tail_keeps_relative_accuracy(self):
        got = poisson_tail(2.0, 150)
        ref = mp_poisson_tail(2.0, 150)
        assert got == pytest.approx(ref, rel=1e-12)
        assert got < 1e-100

    def test_complement_identity(self):
        for rate in RATES:
            top = int(5 * float(rate)) + 1
            for t in range(0, top):
                total = poisson_tail(rate, t) + poisson_cdf(rate, t - 1)
                assert total == pytest.approx(1.0, abs=1e-12)

    def test_against_mpmath_grid(self):
        for rate in RATES:
            for t in [1, 2, 5, 17, 60, 103]:
                assert poisson_tail(rate, t) == pytest.approx(
                    mp_poisson_tail(rate, t), rel=1e-12
                )

    def test_summation_side_handover(self):
        # thresholds straddling the rate exercise both summation directions
        for rate in (30.0, Fraction(1600, 31), 200.0):
            r = float(rate)
            for t in range(int(r) - 3, int(r) + 4):
                assert poisson_tail(rate, t) == pytest.approx(
                    mp_poisson_tail(rate, t), rel=1e-12
                )


class TestRegularizedGammaQ:
    def test_shape_one_is_exp(self):
        assert regularized_gamma_q(1, 1) == pytest.approx(math.exp(-1), rel=1e-12)

    def test_frozen_q_2_1(self):
        assert regularized_gamma_q(2, 1) == pytest.approx(0.73575888234288464319, rel=1e-12)

    def test_poisson_cdf_identity(self):
        # Q(n, lam) = P(A_lam <= n - 1)
        for lam in [0.5, 1.0, 1.8, 51.612903225806448]:
            for n in range(1, 151, 7):
                q = regularized_gamma_q(n, lam)
                assert q == pytest.approx(poisson_cdf(lam, n - 1), abs=1e-10, rel=1e-10)

    def test_against_mpmath_grid(self):
        for a in [0.3, 1.0, 2.5, 7.0, 58.064516129032256, 140.0]:
            for x in [0.05, 0.7, 1.0, 3.9, 51.612903225806448, 200.0]:
                assert regularized_gamma_q(a, x) == pytest.approx(
                    mp_gamma_q(a, x), rel=1e-10
                )

    def test_switch_line_band(self):
        # both algorithm branches must agree with the reference around the
        # series/continued-fraction handover at shape = rate_point + 1
        for a in [1.5, 5.0, 20.0, 80.0]:
            for dx in [-1.5, -1.0, -0.5, -0.01, 0.0, 0.01, 0.5, 1.0, 1.5]:
                x = a + dx
                if x <= 0:
                    continue
                assert regularized_gamma_q(a, x) == pytest.approx(
                    mp_gamma_q(a, x), rel=1e-10
                )

    def test_continuous_discrete_gap_is_small_at_bench_point(self):
        # shape = k*450 = 1800/31; the relaxation and the discrete tail agree
        # approximately, not exactly
        q = regularized_gamma_q(1800 / 31, 1600 / 31)
        assert abs((1 - q) - (1 - poisson_cdf(Fraction(1600, 31), 58))) < 0.05
        # under the integer alignment Q(n, lam) = P(A <= n-1), the nearest
        # discrete counterpart of Q(ky, lam) is P(A <= ceil(ky) - 1)
        assert abs(q - poisson_cdf(Fraction(1600, 31), 57)) < 0.02

    def test_domain_errors(self):
        with pytest.raises(ValidationError):
            regularized_gamma_q(0, 1)
        with pytest.raises(ValidationError):
            regularized_gamma_q(1, 0)


class TestNormalTail:
    def test_symmetry_at_mean(self):
        assert normal_tail(0, 1, 0) == 0.5
        assert normal_tail(400, 3100, 400) == 0.5

    def test_frozen_quantile(self):
        assert normal_tail(0, 1, 1.959964) == pytest.approx(0.025, abs=1e-6)

    def test_against_mpmath(self):
        for z in [-8.0, -3.2, -1.0, 0.3, 2.5, 5.0, 8.0]:
            assert normal_tail(0.0, 1.0, z) == pytest.approx(
                mp_normal_tail(0, 1, z), rel=1e-12
            )

    def test_scaling(self):
        assert normal_tail(400, 3100, 455.67764362830022) == pytest.approx(
            0.15865525393145705, rel=1e-12
        )

    def test_domain_error(self):
        with pytest.raises(ValidationError):
            normal_tail(0, 0, 1)
