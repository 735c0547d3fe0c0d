import math
from fractions import Fraction

import pytest

from inhomapprox.approxfun import (HALF_NUM, QUANT, ApproxFunction, DlFilter, MultiplesFilter, OmegaFilter,
                                   SetFilter, condition_D_scan, delta, dyadic_checkpoints, eval_psi, parse_filter,
                                   partial_sums, restricted_sum, wex_scan)
from inhomapprox.errors import BudgetExceeded
from inhomapprox.realnum import preset


class TestFamilies:
    def test_loglog_family_at_sixteen(self):
        assert ApproxFunction('c_over_q_loglog2', c=1)(16) == Fraction(1, 64)

    def test_eval_psi_applies_filters(self):
        psi = ApproxFunction('c_over_q_loglog2', c=1, filters=['multiples(8)'])
        assert eval_psi(psi, 16) == Fraction(1, 64)
        assert eval_psi(psi, 17) == 0

    def test_log_families_vanish_in_guard_region(self):
        psi = ApproxFunction('c_over_q_loglog2', c=1)
        assert [psi(q) for q in (1, 2, 3, 4)] == [0, 0, 0, 0]

    def test_c_over_q_is_quantized_toward_zero(self):
        value = ApproxFunction('c_over_q', c='1/2')(10)
        assert value == Fraction(QUANT // 20, QUANT)
        assert value <= Fraction(1, 20)

    def test_single_log_family_is_defined_from_three(self):
        psi = ApproxFunction('c_over_q_log', c='1/4')
        assert psi(2) == 0
        assert psi(3) > 0
        assert psi(4) == Fraction(1, 32)
        assert list(psi.float_values(1, 4) > 0) == [False, False, True, True]

    def test_log_family_uses_exact_logs_at_powers_of_two(self):
        assert ApproxFunction('c_over_q_log', c=1)(8) == Fraction(QUANT // 24, QUANT)

    def test_non_dyadic_log_family_is_below_true_value(self):
        psi = ApproxFunction('c_over_q_log_loglog2', c=1)
        q = 100
        true = 1 / (q * math.log2(q) * math.log2(math.log2(q)) ** 2)
        assert float(psi(q)) == pytest.approx(true, rel=1e-12)

    def test_zero_below(self):
        psi = ApproxFunction('zero_below', c='1/4', q0=5)
        assert psi(4) == 0
        assert psi(5) == Fraction(1, 4)

    def test_table(self):
        psi = ApproxFunction('table', table={3: '1/8', '5': '1/16'})
        assert psi(3) == Fraction(1, 8)
        assert psi(5) == Fraction(1, 16)
        assert psi(4) == 0

    def test_values_stay_below_half(self):
        psi = ApproxFunction('c_over_q', c=Fraction(999, 1000), q0=2)
        assert all(psi.num(q) < HALF_NUM for q in range(2, 200))


class TestValidation:
    def test_unknown_family(self):
        with pytest.raises(ValueError, match='unknown family'):
            ApproxFunction('c_over_q_squared')

    def test_constant_too_large(self):
        with pytest.raises(ValueError, match='>= 1/2'):
            ApproxFunction('c_over_q', c=1)

    def test_nonpositive_constant(self):
        with pytest.raises(ValueError):
            ApproxFunction('c_over_q', c=0)

    def test_empty_table(self):
        with pytest.raises(ValueError, match='table'):
            ApproxFunction('table', table={})

    def test_table_checks_every_key(self):
        with pytest.raises(ValueError, match=r'psi\(1000\)'):
            ApproxFunction('table', table={3: '1/8', 1000: '1/2'})

    def test_q_must_be_positive(self):
        with pytest.raises(ValueError):
            ApproxFunction('c_over_q', c='1/2', q0=2).num(0)


class TestFilters:
    @pytest.mark.parametrize('text, cls', [
        ('omega(0.1)', OmegaFilter),
        ('F<=4', None),
        ('set(1,2,3)', SetFilter),
        ('multiples(5)', MultiplesFilter),
        ('dl(1)', DlFilter),
    ])
    def test_parse(self, text, cls):
        f = parse_filter(text)
        if cls is not None:
            assert isinstance(f, cls)
        assert parse_filter(f.spec) == f

    def test_unknown_filter(self):
        with pytest.raises(ValueError):
            parse_filter('primes()')

    def test_filters_compose(self):
        psi = ApproxFunction('c_over_q', c='1/2', q0=2, filters=['multiples(3)', 'set(3,6,7)'])
        assert [q for q in range(1, 20) if psi(q)] == [3, 6]

    def test_mask_agrees_with_predicate(self, small_sieve):
        for spec in ('omega(0.1)', 'multiples(4)', 'dl(1)', 'F<=2'):
            f = parse_filter(spec)
            mask = f.mask(1, 500)
            assert [bool(m) for m in mask] == [bool(f(q)) for q in range(1, 501)]

    def test_key_reflects_filters(self):
        base = ApproxFunction('c_over_q', c='1/2', q0=2)
        assert base.with_filters(parse_filter('multiples(2)')).key != base.key
        assert base == ApproxFunction('c_over_q', c='1/2', q0=2)

    def test_config_round_trip(self):
        psi = ApproxFunction('table', table={2: '1/8'}, filters=['multiples(2)'])
        assert ApproxFunction.from_config(psi.to_config()) == psi


class TestDelta:
    def test_definition(self):
        psi = ApproxFunction('c_over_q', c='1/2', q0=2)
        assert psi.delta(3, 6) == 3 * psi(6) + 6 * psi(3)
        assert delta(psi, 3, 6) == psi.delta(3, 6)

    def test_plain_callable(self):
        assert delta(lambda q: Fraction(1, 10), 1, 2) == Fraction(3, 10)


class TestPartialSums:
    def test_checkpoints(self):
        assert dyadic_checkpoints(10) == [1, 2, 4, 8, 10]
        assert dyadic_checkpoints(16) == [1, 2, 4, 8, 16]
        assert dyadic_checkpoints(40, start=16) == [16, 32, 40]

    def test_exact_partial_sums(self):
        psi = ApproxFunction('zero_below', c='1/4', q0=3)
        report = partial_sums(psi, 8)
        assert report.partial_sums == {1: 0, 2: 0, 4: Fraction(1, 2), 8: Fraction(3, 2)}


class TestWex:
    def test_window_grows_for_divergent_family(self):
        psi = ApproxFunction('c_over_q_log', c=1)
        report = wex_scan(psi, [2 ** 8, 2 ** 10])
        first, second = report.wex_windows
        assert first.upper > first.Q
        assert 0 < first.window_sum < second.window_sum

    def test_zero_function(self):
        psi = ApproxFunction('c_over_q', c='1/2', q0=2, filters=['set()'])
        assert wex_scan(psi, [64]).wex_windows[0].window_sum == 0

    def test_term_budget(self, approx_config):
        approx_config.WEX_TERM_BUDGET = 10
        with pytest.raises(BudgetExceeded):
            wex_scan(ApproxFunction('c_over_q_log', c=1), [2 ** 16])

    def test_needs_sixteen(self):
        with pytest.raises(ValueError):
            wex_scan(ApproxFunction('c_over_q_log', c=1), [8])


class TestConditionD:
    def test_partial_sums_are_positive_and_nondecreasing(self):
        psi = ApproxFunction('c_over_q_log_loglog2', c=1)
        report = condition_D_scan(psi, preset('sqrt2'), 0, 256)
        sums = [report.condition_d[Q] for Q in sorted(report.condition_d)]
        assert sums[-1] > 0
        assert all(b >= a for a, b in zip(sums, sums[1:]))
        assert report.indeterminate == []

    def test_zero_function(self):
        psi = ApproxFunction('c_over_q', c='1/2', q0=2, filters=['set()'])
        report = condition_D_scan(psi, preset('sqrt2'), 0, 64)
        assert set(report.condition_d.values()) == {0.0}


class TestRestrictedSum:
    def test_empty_set(self):
        result = restricted_sum(lambda q: Fraction(1, q), set(), 64)
        assert result.total == 0
        assert result.count == 0
        assert result.lower_density == 0

    def test_everything_matches_partial_sum(self):
        psi = ApproxFunction('c_over_q', c='1/2', q0=2)
        result = restricted_sum(psi, lambda q: True, 64)
        assert result.total == partial_sums(psi, 64).partial_sums[64]
        assert result.lower_density == 1

    def test_even_numbers(self):
        result = restricted_sum(lambda q: 1 / q, lambda q: q % 2 == 0, 1024)
        assert result.lower_density == pytest.approx(0.5)
        assert result.total == pytest.approx(sum(1 / q for q in range(2, 1025, 2)))
