from fractions import Fraction

import pytest

from inhomapprox.approxfun import ApproxFunction
from inhomapprox.errors import IndeterminateAtPrecision
from inhomapprox.intervals import (FixedPointSum, IntervalUnion, UnionAccumulator, box_ops,
                                   box_pair_intersection_measure, build_Aq, intersect, measure,
                                   pair_measure_direct, pairwise_intersection_measure, union)
from inhomapprox.realnum import CertifiedReal, preset

F = Fraction


class TestIntervalUnion:
    def test_empty_measure(self):
        assert measure(IntervalUnion()) == 0

    def test_rejects_overlap(self):
        with pytest.raises(ValueError):
            IntervalUnion.from_pairs([(0, F(1, 2)), (F(1, 4), 1)])

    def test_rejects_out_of_range(self):
        with pytest.raises(ValueError):
            IntervalUnion.from_pairs([(F(-1, 4), F(1, 2))])

    def test_abutting_components_stay_open(self):
        u = IntervalUnion.from_pairs([(0, F(1, 2)), (F(1, 2), 1)])
        assert not u.contains(F(1, 2))
        assert u.contains(F(1, 4))
        assert measure(u) == 1

    def test_intersect_and_union(self):
        u = IntervalUnion.from_pairs([(0, F(1, 2))])
        v = IntervalUnion.from_pairs([(F(1, 4), F(3, 4))])
        assert intersect(u, v).components == ((F(1, 4), F(1, 2)),)
        assert union(u, v).components == ((0, F(3, 4)),)
        assert measure(union(u, v)) + measure(intersect(u, v)) == measure(u) + measure(v)

    def test_dump_round_trip(self):
        u = IntervalUnion.from_pairs([(F(1, 7), F(2, 7)), (F(1, 2), F(5, 6))])
        assert IntervalUnion.from_dump(u.dump()) == u


class TestBuildAq:
    def test_single_interval(self, tenth):
        A = build_Aq(1, tenth, F(1, 4))
        assert A.components == ((F(3, 20), F(7, 20)),)
        assert measure(A) == F(1, 5)

    def test_two_components(self, tenth):
        A = build_Aq(2, tenth, F(1, 4))
        assert A.components == ((F(3, 40), F(7, 40)), (F(23, 40), F(27, 40)))
        assert measure(A) == F(1, 5)

    def test_wrap_around(self, tenth):
        A = build_Aq(1, tenth, F(1, 20))
        assert A.components == ((0, F(3, 20)), (F(19, 20), 1))
        assert measure(A) == F(1, 5)

    def test_zero_width_is_empty(self):
        assert build_Aq(3, lambda q: F(0), preset('sqrt2')).is_empty

    @pytest.mark.parametrize('q', [2, 3, 7, 50, 101])
    def test_measure_is_twice_psi(self, q, half_over_q):
        assert measure(build_Aq(q, half_over_q, preset('sqrt2'))) == 2 * half_over_q(q)

    def test_perturbation_is_recorded(self, half_over_q):
        sqrt2 = preset('sqrt2')
        A = build_Aq(5, half_over_q, sqrt2)
        assert A.perturbation == sqrt2.err / 5

    def test_rejects_width_at_half(self):
        with pytest.raises(ValueError):
            build_Aq(1, lambda q: F(1, 2), F(1, 4))

    def test_endpoint_on_boundary_is_indeterminate(self):
        # gamma known only to +-1e-3 around 1/10: the endpoint of A_1 at 0 is undecidable
        gamma = CertifiedReal.fixed('0.1', '0.001')
        with pytest.raises(IndeterminateAtPrecision):
            build_Aq(1, lambda q: F(1, 10), gamma)


class TestPairMeasure:
    def test_worked_pair(self, tenth):
        pm = pairwise_intersection_measure(1, 2, tenth, F(1, 4))
        assert pm.measure == F(1, 40)
        assert pm.product == F(1, 25)
        assert pm.gcd == 1
        assert pm.delta == F(3, 10)
        assert pm.small_delta
        ratio = abs(pm.measure - pm.product) / (pm.gcd * min(F(1, 10), F(1, 20)))
        assert ratio == F(3, 10)

    def test_diagonal_is_the_set_itself(self, half_over_q):
        sqrt2 = preset('sqrt2')
        pm = pairwise_intersection_measure(6, 6, half_over_q, sqrt2)
        assert pm.measure == measure(build_Aq(6, half_over_q, sqrt2))

    @pytest.mark.parametrize('q, q2', [(3, 5), (4, 6), (12, 18), (7, 20), (30, 45), (64, 96)])
    def test_closed_form_matches_interval_arithmetic(self, q, q2, half_over_q):
        sqrt2 = preset('sqrt2')
        pm = pairwise_intersection_measure(q, q2, half_over_q, sqrt2)
        assert pm.measure == pair_measure_direct(q, q2, half_over_q, sqrt2)

    @pytest.mark.parametrize('gamma', ['1/3', '2/7', '0'])
    def test_closed_form_with_rational_shift(self, gamma, tenth):
        for q, q2 in ((2, 4), (3, 9), (5, 6), (8, 12)):
            pm = pairwise_intersection_measure(q, q2, tenth, gamma)
            assert pm.measure == pair_measure_direct(q, q2, tenth, gamma)


class TestUnionAccumulator:
    def test_matches_explicit_union(self, half_over_q):
        sqrt2 = preset('sqrt2')
        acc = UnionAccumulator(half_over_q, sqrt2).extend(range(1, 40))
        explicit = IntervalUnion()
        for q in range(1, 40):
            explicit = union(explicit, build_Aq(q, half_over_q, sqrt2))
        assert acc.measure() == measure(explicit)
        assert acc.as_union().measure() == acc.measure()

    def test_measure_is_monotone(self, half_over_q):
        acc = UnionAccumulator(half_over_q, preset('golden'))
        previous = F(0)
        for q in range(1, 60):
            acc.add(q)
            assert acc.measure() >= previous
            previous = acc.measure()


class TestFixedPointSum:
    def test_encloses_the_exact_sum(self):
        terms = [F(1, 3), F(2, 7), F(5, 11)]
        s = FixedPointSum(bits=64)
        for t in terms:
            s.add(t)
        assert s.lo <= sum(terms) <= s.hi
        assert s.compare(F(1, 2)) == 1
        assert s.compare(2) == -1

    def test_merge_needs_equal_resolution(self):
        with pytest.raises(ValueError):
            FixedPointSum(bits=64).merge(FixedPointSum(bits=32))

    def test_merge_is_order_independent(self):
        a, b = FixedPointSum(), FixedPointSum()
        a.add(F(1, 3))
        b.add(F(1, 5))
        left = FixedPointSum().merge(a).merge(b)
        right = FixedPointSum().merge(b).merge(a)
        assert (left.lo, left.hi) == (right.lo, right.hi)


class TestProductBoxes:
    def test_two_dimensional_box(self, tenth):
        box = box_ops(2, 1, tenth, [F(1, 4), F(1, 4)])
        assert box.k == 2
        assert box.measure() == F(1, 25)

    def test_dimension_must_match(self, tenth):
        with pytest.raises(ValueError):
            box_ops(3, 1, tenth, [F(1, 4)])

    def test_diagonal_pair_is_the_box(self, tenth):
        gammas = [F(1, 4), F(1, 3), F(2, 5)]
        assert box_pair_intersection_measure(4, 4, tenth, gammas) == box_ops(3, 4, tenth, gammas).measure()

    def test_pair_is_product_of_coordinates(self, tenth):
        gammas = [F(1, 4), F(1, 4)]
        assert box_pair_intersection_measure(1, 2, tenth, gammas) == F(1, 40) ** 2
        assert box_ops(2, 1, tenth, gammas).intersect(box_ops(2, 2, tenth, gammas)).measure() == F(1, 40) ** 2
