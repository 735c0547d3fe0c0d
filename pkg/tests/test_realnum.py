import math
from fractions import Fraction

import mpmath
import pytest

from inhomapprox.approxfun import ApproxFunction
from inhomapprox.errors import IndeterminateAtPrecision, RangeExceeded
from inhomapprox.realnum import (Ball, CertifiedReal, cf_expand, convergents_of, dist_to_int, in_liouville_set,
                                 liouville_set_scan, parse_real, preset, reset_presets, sigma_of_Q,
                                 sigma_running, signed_frac, slow_growth_check)


class TestCertifiedReal:
    def test_preset_error_is_certified(self):
        sqrt2 = preset('sqrt2')
        ball = sqrt2.ball()
        assert ball.lo ** 2 <= 2 <= ball.hi ** 2

    def test_refine_doubles_digits(self):
        sqrt2 = preset('sqrt2')
        digits = sqrt2.digits
        sqrt2.refine()
        assert sqrt2.digits == 2 * digits
        ball = sqrt2.ball()
        assert ball.lo ** 2 <= 2 <= ball.hi ** 2

    def test_refine_stops_at_cap(self, approx_config):
        approx_config.PRECISION_CAP = 64
        with pytest.raises(IndeterminateAtPrecision):
            preset('golden').refine()

    def test_fixed_values_cannot_refine(self):
        x = CertifiedReal.fixed('1.41421356', '1e-8')
        with pytest.raises(IndeterminateAtPrecision):
            x.refine()

    def test_exact_values_have_zero_error(self):
        x = parse_real('1/3')
        assert x.is_exact
        assert x.approx == Fraction(1, 3)

    def test_presets_are_shared_until_reset(self):
        assert preset('e') is preset('e')
        first = preset('e')
        reset_presets()
        assert preset('e') is not first

    @pytest.mark.parametrize('name', ['pi', 'ln2', 'e'])
    def test_mpmath_backed_presets(self, name):
        expected = {'pi': math.pi, 'ln2': math.log(2), 'e': math.e}[name]
        assert float(preset(name).approx) == pytest.approx(expected, rel=1e-15)

    def test_unknown_preset(self):
        with pytest.raises(ValueError):
            preset('tau')

    def test_unparseable_text(self):
        with pytest.raises(ValueError):
            parse_real('not-a-number')


class TestFractionalParts:
    @pytest.mark.parametrize('x, expected', [
        (Fraction(3, 4), Fraction(-1, 4)),
        (3, Fraction(0)),
        (Fraction(1, 2), Fraction(1, 2)),
        (Fraction(-1, 2), Fraction(1, 2)),
    ])
    def test_signed_frac_exact(self, x, expected):
        assert signed_frac(x) == expected

    @pytest.mark.parametrize('x, expected', [
        ('2.3', Fraction(3, 10)),
        ('-0.5', Fraction(1, 2)),
    ])
    def test_dist_to_int_exact(self, x, expected):
        assert dist_to_int(x) == expected

    def test_dist_to_int_certified(self):
        ball = dist_to_int(preset('sqrt2'))
        assert isinstance(ball, Ball)
        assert float(ball.center) == pytest.approx(math.sqrt(2) - 1, rel=1e-15)
        assert math.sqrt(2) - 1 - 1e-15 <= float(ball.hi)

    def test_multiplier_and_shift(self):
        assert signed_frac(Fraction(1, 3), multiplier=3, shift=Fraction(1, 4)) == Fraction(1, 4)


class TestContinuedFractions:
    def test_sqrt2(self):
        cf = cf_expand(preset('sqrt2'), 8)
        assert cf.quotients == (1, 2, 2, 2, 2, 2, 2, 2)
        assert cf.complete

    def test_golden(self):
        assert cf_expand(preset('golden'), 10).quotients == (1,) * 10

    def test_e(self):
        assert cf_expand(preset('e'), 11).quotients == (2, 1, 2, 1, 1, 4, 1, 1, 6, 1, 1)

    def test_rational_terminates(self):
        cf = cf_expand(Fraction(7, 3), 10)
        assert cf.quotients == (2, 3)
        assert cf.terminated
        assert cf.convergents[-1] == (7, 3)

    def test_convergents(self):
        assert convergents_of([1, 2, 2]) == [(1, 1), (3, 2), (7, 5)]

    def test_precision_cap_returns_prefix(self, approx_config):
        approx_config.PRECISION_CAP = approx_config.PRECISION_DIGITS
        cf = cf_expand(preset('sqrt2'), 500)
        assert not cf.complete
        assert all(a == 2 for a in cf.quotients[1:])


class TestSigma:
    def test_golden(self):
        profile = sigma_of_Q(preset('golden'), 100)
        assert profile.witness == 2
        assert profile.sigma == pytest.approx(2.083, abs=1e-3)
        assert profile.sigma_lo <= profile.sigma <= profile.sigma_hi

    def test_sqrt2_at_two(self):
        assert sigma_of_Q(preset('sqrt2'), 2).sigma == pytest.approx(2.543, abs=1e-3)

    def test_enclosure_is_strict_for_exact_gamma(self):
        # ||2/10|| = 1/5, so sigma(2) = log 5 / log 2
        profile = sigma_of_Q(Fraction(1, 10), 2)
        with mpmath.workdps(50):
            true = mpmath.log(5) / mpmath.log(2)
            assert profile.sigma_lo < true < profile.sigma_hi
        assert profile.sigma_hi - profile.sigma_lo < 1e-12

    def test_running_is_nondecreasing(self):
        running = sigma_running(preset('sqrt2'), 200)
        assert len(running) == 201
        assert all(b >= a for a, b in zip(running, running[1:]))

    def test_needs_q_two(self):
        with pytest.raises(ValueError):
            sigma_of_Q(preset('sqrt2'), 1)

    def test_label_is_provisional(self):
        profile = sigma_of_Q(preset('sqrt2'), 64)
        assert profile.provisional
        assert profile.classification in ('tamely', 'wildly', 'indeterminate')


class TestLiouvilleSet:
    def test_rational_shift_gives_multiples(self):
        scan = liouville_set_scan(Fraction(1, 3), 10, lambda Q: 1)
        assert scan.members == [3, 6, 9]
        assert scan.indeterminate == []

    def test_sqrt2_has_no_members(self):
        assert liouville_set_scan(preset('sqrt2'), 1000, lambda Q: 3).members == []

    def test_sigma_must_not_decrease(self):
        with pytest.raises(ValueError):
            liouville_set_scan(preset('sqrt2'), 10, lambda Q: 5 - Q)

    def test_single_membership(self):
        assert in_liouville_set(parse_real('1/4'), 8, 2) is True
        assert in_liouville_set(parse_real('1/4'), 6, 2) is False


class TestSlowGrowth:
    def test_beyond_sieve(self):
        with pytest.raises(RangeExceeded):
            slow_growth_check(Fraction(1, 3), 10, ApproxFunction('c_over_q', c='1/2', q0=2), 14)

    def test_max_divisor_count(self):
        report = slow_growth_check(Fraction(1, 3), 100, ApproxFunction('c_over_q', c='1/2', q0=2), 4)
        assert report.q_bound == 10_000
        assert report.max_d == 64
        assert report.witness == 7560
        assert report.member is False
        assert report.ratio == pytest.approx(64 * math.log2(100) / 10)
