from fractions import Fraction

import numpy as np
import pytest

from inhomapprox import arith
from inhomapprox.arith import (F, as_fraction, big_omega, build_sieve, compare_with_margin, divisor_count,
                               divisor_sigma, dl_index, euler_phi, f_table, f_tail_count, factor,
                               omega_support_filter, zeta_constants)
from inhomapprox.errors import RangeExceeded


class TestAsFraction:
    @pytest.mark.parametrize('value, expected', [
        (3, Fraction(3)),
        ('0.1', Fraction(1, 10)),
        ('2/6', Fraction(1, 3)),
        (0.1, Fraction(1, 10)),
        (Fraction(5, 7), Fraction(5, 7)),
    ])
    def test_coercions(self, value, expected):
        assert as_fraction(value) == expected

    def test_rejects_other_types(self):
        with pytest.raises(TypeError):
            as_fraction([1])


class TestFactor:
    def test_one_has_no_factors(self):
        assert factor(1).factors == ()

    def test_twelve(self):
        assert factor(12).factors == ((2, 2), (3, 1))

    def test_prime(self):
        assert factor(97).factors == ((97, 1),)

    def test_trial_division_beyond_table(self, small_sieve):
        n = 10_007 * 10_009
        assert factor(n).factors == ((10_007, 1), (10_009, 1))

    def test_rejects_zero(self):
        with pytest.raises(ValueError):
            factor(0)


class TestMultiplicativeFunctions:
    def test_values_at_twelve(self):
        assert euler_phi(12) == 4
        assert divisor_count(12) == 6
        assert big_omega(12) == 3
        assert divisor_sigma(12) == 28

    def test_sieve_agrees_with_factorization(self, small_sieve):
        for q in (1, 2, 30, 97, 360, 1024, 9999):
            f = small_sieve.factor(q)
            assert int(small_sieve.phi[q]) == f.phi
            assert int(small_sieve.d[q]) == f.d
            assert int(small_sieve.omega[q]) == f.omega

    def test_table_is_read_only(self):
        table = build_sieve(50)
        with pytest.raises(ValueError):
            table.phi[3] = 0

    def test_sieve_limit_is_enforced(self, approx_config):
        with pytest.raises(RangeExceeded):
            arith.get_sieve(approx_config.SIEVE_LIMIT + 1)


class TestF:
    def test_small_values(self):
        assert F(1).value == 0
        assert F(1).err == 0
        assert float(F(2).value) == pytest.approx(0.5)

    def test_six(self):
        # divisors 2, 3, 6
        expected = 1 / 2 + np.log2(3) / 3 + np.log2(6) / 6
        assert float(F(6).value) == pytest.approx(expected, rel=1e-12)

    def test_table_matches_direct_evaluation(self, small_sieve):
        values, errs = f_table(2000)
        for q in (1, 2, 6, 360, 1680, 2000):
            direct = F(q)
            assert abs(float(values[q]) - float(direct.value)) <= float(errs[q]) + float(direct.err) + 1e-15


class TestFTail:
    def test_threshold_zero_counts_everything_but_one(self):
        assert f_tail_count(100, 0) == (99, 0)

    def test_large_threshold_counts_nothing(self):
        assert f_tail_count(16, 10).count == 0

    def test_needs_sixteen(self):
        with pytest.raises(ValueError):
            f_tail_count(10, 1)


class TestCompareWithMargin:
    def test_exact_never_undecided(self):
        assert compare_with_margin(1, 0, 1) == -1
        assert compare_with_margin(2, 0, 1) == 1

    def test_margin(self):
        assert compare_with_margin(1.0, 0.1, 1.05) == 0
        assert compare_with_margin(1.2, 0.1, 1.0) == 1


class TestOmegaFilter:
    @pytest.mark.parametrize('q, expected', [
        (2 ** 20, False),
        (16, False),
        (7, True),
        (101, True),
        (2, True),
    ])
    def test_values(self, q, expected):
        assert omega_support_filter(q, '0.1') is expected

    def test_rejects_nonpositive_epsilon(self):
        with pytest.raises(ValueError):
            omega_support_filter(16, 0)


class TestWeightClasses:
    @pytest.mark.parametrize('q, expected', [(1, 0), (2, 1), (15, 0), (30, 1)])
    def test_dl_index(self, q, expected):
        assert dl_index(q) == expected

    def test_divisor_class_index(self):
        assert arith.divisor_class_index(1) == 0
        assert arith.divisor_class_index(12) == 2


class TestZetaConstants:
    def test_k_two(self):
        consts = zeta_constants(2)
        assert consts.zeta2 == pytest.approx(np.pi ** 2 / 6)
        assert consts.zeta_k_minus_1 is None
        assert consts.neg_zeta_prime == pytest.approx(3.9323, abs=1e-3)
        assert consts.C >= consts.neg_zeta_prime / 4

    def test_k_four(self):
        assert zeta_constants(4).zeta_k_minus_1 == pytest.approx(1.2020569, rel=1e-7)

    def test_rejects_small_k(self):
        with pytest.raises(ValueError):
            zeta_constants(1)
