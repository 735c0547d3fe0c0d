from fractions import Fraction

import pytest

from inhomapprox.approxfun import ApproxFunction
from inhomapprox.bounds import (BoundsConfig, chi, counting_decomposition, counting_lemma_ratio, counting_sum,
                                dyadic_level, f_moment_tail_check, harman_c0_estimate, master_check,
                                master_scan, wild_counting_split)
from inhomapprox.realnum import preset

F = Fraction


@pytest.fixture
def loglog_psi():
    return ApproxFunction('c_over_q_loglog2', c=1)


class TestChi:
    def test_large_radius_is_everything(self):
        assert chi(preset('sqrt2'), 5, 2, F(3, 2)) is True

    def test_rational_shift(self):
        assert chi(F(1, 4), -1, 1, F(3, 10)) is True
        assert chi(F(1, 4), -1, 1, F(1, 5)) is False


class TestMasterCheck:
    def test_config_rejects_small_h(self, half_over_q):
        with pytest.raises(ValueError):
            BoundsConfig(half_over_q, 'sqrt2', H=2)

    def test_three_five(self, half_over_q):
        cfg = BoundsConfig(half_over_q, 'sqrt2', H=4)
        check = master_check(5, 3, cfg)
        assert check.branch == 1
        assert check.gcd == 1
        assert check.passed is True
        assert check.lhs <= check.rhs

    def test_pair_order(self, half_over_q):
        with pytest.raises(ValueError):
            master_check(3, 5, BoundsConfig(half_over_q, 'sqrt2'))

    def test_second_branch_records_implied_constant(self):
        psi = ApproxFunction('zero_below', c='1/4', q0=1)
        cfg = BoundsConfig(psi, 'golden', H=3)
        check = master_check(41, 20, cfg)
        assert check.delta >= cfg.H * check.gcd
        assert check.branch == 2
        assert check.passed is None
        assert check.c0_implied >= 0

    def test_scan(self, half_over_q):
        cfg = BoundsConfig(half_over_q, 'sqrt2', H=4, q_max=12)
        report = master_scan(cfg)
        assert report.fitted['pairs'] == 66
        assert report.passed is not False
        assert cfg.C0 == report.fitted['C0_implied']

    def test_scan_is_thread_independent(self, half_over_q):
        serial = master_scan(BoundsConfig(half_over_q, 'sqrt2', q_max=15), threads=1)
        parallel = master_scan(BoundsConfig(half_over_q, 'sqrt2', q_max=15), threads=4)
        assert serial.table() == parallel.table()


class TestHarman:
    def test_zero_function(self):
        psi = ApproxFunction('c_over_q', c='1/2', q0=2, filters=['set()'])
        est = harman_c0_estimate(20, psi, preset('sqrt2'))
        assert est.c0 == 0
        assert est.pair is None
        assert est.pairs_examined == 0

    def test_worked_pair(self, tenth):
        est = harman_c0_estimate(2, tenth, F(1, 4))
        assert est.c0 == F(3, 10)
        assert est.pair == (1, 2)
        assert est.running == (0, F(3, 10))

    def test_running_sup_is_nondecreasing(self, half_over_q):
        est = harman_c0_estimate(30, half_over_q, preset('sqrt2'))
        assert all(b >= a for a, b in zip(est.running, est.running[1:]))
        assert est.running[-1] == est.c0


class TestCountingSum:
    def test_zero_psi(self):
        psi = ApproxFunction('c_over_q_loglog2', c=1)
        assert counting_sum(3, psi, preset('sqrt2')).total == 0

    @pytest.mark.parametrize('q', [60, 100, 360])
    def test_decomposition_preserves_total(self, q, loglog_psi):
        gamma = preset('golden')
        s = counting_sum(q, loglog_psi, gamma)
        dec = counting_decomposition(q, loglog_psi, gamma)
        assert dec.total == s.total
        assert dec.indeterminate == s.indeterminate == 0
        assert sum(c.size for c in dec.cells.values()) == q - 1

    def test_decomposition_checks(self, loglog_psi):
        dec = counting_decomposition(360, loglog_psi, preset('golden'))
        assert dec.small_part <= dec.total
        assert dec.part_k_small + dec.part_k_large == dec.total
        assert set(dec.checks) == {'I', 'II'}

    @pytest.mark.parametrize('q2, k', [(50, 0), (99, 0), (49, 1), (25, 1), (24, 2), (1, 6)])
    def test_dyadic_level(self, q2, k):
        assert dyadic_level(100, q2) == k


class TestCountingLemmaRatio:
    def test_bounded_stream(self, loglog_psi):
        report = counting_lemma_ratio(range(1, 200), loglog_psi, preset('sqrt2'))
        assert [row['q'] for row in report.rows] == list(range(16, 200))
        assert report.fitted['max_ratio'] == max(row['ratio'] for row in report.rows)
        assert all(row['ratio'] >= 0 for row in report.rows)

    def test_linear_normalization_is_smaller(self, loglog_psi):
        tame = counting_lemma_ratio(range(16, 80), loglog_psi, preset('sqrt2'))
        linear = counting_lemma_ratio(range(16, 80), loglog_psi, preset('sqrt2'), normalization='linear')
        assert linear.fitted['max_ratio'] <= tame.fitted['max_ratio']

    def test_empty_liouville_window(self, loglog_psi):
        report = counting_lemma_ratio(range(16, 100), loglog_psi, preset('liouville'), liouville_windows=[(10, 4)])
        assert report.rows == []
        assert any('empty' in note for note in report.notes)

    def test_unknown_normalization(self, loglog_psi):
        with pytest.raises(ValueError):
            counting_lemma_ratio(range(16, 20), loglog_psi, preset('sqrt2'), normalization='log')


class TestWildSplit:
    def test_split_covers_part_of_total(self, loglog_psi):
        split = wild_counting_split(360, 2, loglog_psi, preset('golden'))
        dec = counting_decomposition(360, loglog_psi, preset('golden'))
        assert split.total_b1 + split.total_b2 <= dec.total
        assert all(c.kind in ('B1', 'B2') for c in split.cells)

    def test_kappa_range(self, loglog_psi):
        with pytest.raises(ValueError):
            wild_counting_split(360, 2, loglog_psi, preset('golden'), kappa=F(1, 2))

    def test_needs_sixteen(self, loglog_psi):
        with pytest.raises(ValueError):
            wild_counting_split(8, 2, loglog_psi, preset('golden'))


class TestMoments:
    @pytest.mark.parametrize('Q', [16, 1000])
    def test_passes(self, Q):
        check = f_moment_tail_check(Q, 2)
        assert check.passed
        assert check.moment_sum <= check.moment_bound
        assert check.tail_count <= check.tail_bound

    def test_higher_k(self):
        assert f_moment_tail_check(4096, 4).passed

    def test_rejects_small_k(self):
        with pytest.raises(ValueError):
            f_moment_tail_check(100, 1)

    def test_rejects_small_q(self):
        with pytest.raises(ValueError):
            f_moment_tail_check(8, 2)
