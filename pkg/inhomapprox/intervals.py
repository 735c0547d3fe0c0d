"""
Interval Unions
===============
Finite unions of open intervals in [0, 1] with exact rational endpoints,
the approximation sets

    A_q = {x in [0, 1]: ||q x - gamma|| < psi(q)},

their measures, intersections and unions, product boxes for the
k-dimensional sets B_q, and a closed form for |A_q cap A_q'| that never
materializes the q + q' components.

gamma enters through its certified rational approximation; each A_q
records the endpoint perturbation err(gamma)/q.
"""
import logging
import math
from bisect import bisect_left
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Tuple

from .approxfun import delta
from .arith import as_fraction
from .cache import cached, make_cache_key_aq
from .realnum import Undecided, certify, coerce_real

logger = logging.getLogger(__name__)

ZERO = Fraction(0)
ONE = Fraction(1)
PAIR_MASS_BITS = 512


@dataclass(frozen=True)
class IntervalUnion:
    """
    Sorted, pairwise disjoint open intervals (a, b) with 0 <= a < b <= 1.

    Abutting components (b_i == a_{i+1}) stay separate: the shared endpoint
    is not in the set.
    """

    components: Tuple[Tuple[Fraction, Fraction], ...] = ()
    perturbation: Fraction = field(default=ZERO, compare=False)

    def __post_init__(self):
        prev_b = ZERO
        for a, b in self.components:
            if not (ZERO <= a < b <= ONE):
                raise ValueError(f"bad component ({a}, {b})")
            if a < prev_b:
                raise ValueError(f"components overlap or are unsorted at ({a}, {b})")
            prev_b = b

    @classmethod
    def from_pairs(cls, pairs, perturbation=ZERO):
        return cls(tuple((as_fraction(a), as_fraction(b)) for a, b in pairs), as_fraction(perturbation))

    def __len__(self):
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    @property
    def is_empty(self):
        return not self.components

    def measure(self):
        return sum((b - a for a, b in self.components), ZERO)

    def intersect(self, other):
        """Two-pointer sweep over both component lists."""
        out = []
        i = j = 0
        xs, ys = self.components, other.components
        while i < len(xs) and j < len(ys):
            a = max(xs[i][0], ys[j][0])
            b = min(xs[i][1], ys[j][1])
            if a < b:
                out.append((a, b))
            if xs[i][1] < ys[j][1]:
                i += 1
            else:
                j += 1
        return IntervalUnion(tuple(out), max(self.perturbation, other.perturbation))

    def union(self, other):
        merged = sorted(self.components + other.components)
        out = []
        for a, b in merged:
            if out and a < out[-1][1]:
                out[-1] = (out[-1][0], max(out[-1][1], b))
            else:
                out.append((a, b))
        return IntervalUnion(tuple(out), max(self.perturbation, other.perturbation))

    def contains(self, x):
        x = as_fraction(x)
        i = bisect_left(self.components, (x, ONE + 1)) - 1
        return i >= 0 and self.components[i][0] < x < self.components[i][1]

    def dump(self):
        """One component per line: 'num_a/den_a num_b/den_b'."""
        return ''.join(f"{a.numerator}/{a.denominator} {b.numerator}/{b.denominator}\n"
                       for a, b in self.components)

    @classmethod
    def from_dump(cls, text):
        pairs = [line.split() for line in text.splitlines() if line.strip()]
        return cls.from_pairs(pairs)


def measure(u):
    return u.measure()


def intersect(u, v):
    return u.intersect(v)


def union(u, v):
    return u.union(v)


# ─── Approximation sets ───

def _psi_value(psi, q):
    value = as_fraction(psi(q))
    if not ZERO <= value < Fraction(1, 2):
        raise ValueError(f"psi({q}) = {value} is outside [0, 1/2)")
    return value


def _psi_key(psi):
    return getattr(psi, 'key', None)


def _aq_pieces(q, w, center):
    """Clipped components of A_q for psi(q) = w and gamma-hat = center."""
    out = []
    for n in range(math.floor(-center - w), math.ceil(q - center + w) + 1):
        a = max((n + center - w) / q, ZERO)
        b = min((n + center + w) / q, ONE)
        if a < b:
            out.append((a, b))
    out.sort()
    return tuple(out)


def _check_boundaries(q, w, snap):
    """Every endpoint numerator n + gamma-hat +- w decided against 0 and q."""
    if snap.err == 0:
        return
    center = Fraction(snap.num, snap.den)
    for s in (w, -w):
        x = center + s
        for edge in (ZERO, Fraction(q)):
            # nearest n + x to the edge
            n = round(edge - x)
            if abs(n + x - edge) <= snap.err:
                raise Undecided


def _certified_snapshot(gamma, checks):
    """Refine gamma until every (q, psi(q)) boundary check passes."""
    def attempt(snap):
        for q, w in checks:
            _check_boundaries(q, w, snap)
        return snap
    return certify(attempt, gamma)


def build_Aq(q, psi, gamma):
    """
    The approximation set A_q for psi and gamma.

    Args:
        q: positive integer.
        psi: ApproxFunction, or any callable returning Fractions in [0, 1/2).
        gamma: CertifiedReal or rational.

    Returns:
        IntervalUnion whose perturbation field is err(gamma)/q.

    Raises:
        IndeterminateAtPrecision: if an endpoint stays within err(gamma) of
            0 or 1 up to the precision cap.
    """
    if q < 1:
        raise ValueError(f"build_Aq needs q >= 1, got {q}")
    gamma = coerce_real(gamma)
    w = _psi_value(psi, q)

    snap = _certified_snapshot(gamma, ((q, w),))
    perturbation = snap.err / q

    def compute():
        if w == 0:
            return IntervalUnion((), perturbation)
        return IntervalUnion(_aq_pieces(q, w, Fraction(snap.num, snap.den)), perturbation)

    psi_key = _psi_key(psi)
    if psi_key is None:
        return compute()
    return cached(make_cache_key_aq(q, psi_key, f"{gamma.name}@{snap.digits}"), compute)


def pair_measure_exact(q, q2, w, w2, center):
    """
    |A_q cap A_q'| in closed form.

    The overlap is gcd * sum_j L(t_j), where L is the overlap length of two
    intervals with half-widths w/q and w2/q2 at centre distance
    t_j = (gcd*j + center*(q2 - q))/(q q2). Everything is scaled to one
    integer denominator, so the sum over j splits into a run of full
    overlaps and two arithmetic ramps.
    """
    if w == 0 or w2 == 0:
        return ZERO
    g = math.gcd(q, q2)
    P, Dp = w.numerator, w.denominator
    P2, Dp2 = w2.numerator, w2.denominator
    G, D = center.numerator, center.denominator

    U = Dp * Dp2 * D * q * q2
    W = P * Dp2 * D * q2
    W2 = P2 * Dp * D * q
    a = Dp * Dp2 * g * D
    b = Dp * Dp2 * G * (q2 - q)
    S = W + W2
    K = abs(W - W2)
    m = min(W, W2)

    def run(j1, j2):
        return (j2 - j1 + 1, (j1 + j2) * (j2 - j1 + 1) // 2) if j2 >= j1 else (0, 0)

    total = 0
    count, _ = run(-((K + b) // a), (K - b) // a)
    total += 2 * m * count
    count, jsum = run((K - b) // a + 1, -((b - S) // a) - 1)
    total += count * (S - b) - a * jsum
    count, jsum = run((-S - b) // a + 1, -((K + b) // a) - 1)
    total += count * (S + b) + a * jsum
    return Fraction(g * total, U)


@dataclass(frozen=True)
class PairMeasure:
    """|A_q cap A_q'| with the quantities the master bound compares against."""

    q: int
    q2: int
    measure: Fraction
    product: Fraction
    gcd: int
    delta: Fraction
    H: int
    small_delta: bool
    perturbation: Fraction = ZERO


def pairwise_intersection_measure(q, q2, psi, gamma, H=4):
    """
    |A_q cap A_q'| exactly, plus gcd, Delta and whether Delta < H*gcd.

    product is |A_q| |A_q'| = 4 psi(q) psi(q').
    """
    gamma = coerce_real(gamma)
    w, w2 = _psi_value(psi, q), _psi_value(psi, q2)
    # same boundary certification as build_Aq so the two always agree
    snap = _certified_snapshot(gamma, ((q, w), (q2, w2)))
    center = Fraction(snap.num, snap.den)
    g = math.gcd(q, q2)
    d = delta(psi, q, q2)
    return PairMeasure(
        q=q, q2=q2,
        measure=pair_measure_exact(q, q2, w, w2, center),
        product=4 * w * w2,
        gcd=g,
        delta=d,
        H=H,
        small_delta=d < H * g,
        perturbation=snap.err / min(q, q2),
    )


def pair_measure_direct(q, q2, psi, gamma):
    """The same measure through explicit IntervalUnion intersection."""
    return build_Aq(q, psi, gamma).intersect(build_Aq(q2, psi, gamma)).measure()


class UnionAccumulator:
    """
    Measure of a growing union of A_q sets, kept as the list of complement
    gaps so each new q only touches the intervals that meet a gap.
    """

    def __init__(self, psi, gamma):
        self.psi = psi
        self.gamma = coerce_real(gamma)
        self.gaps = [(ZERO, ONE)]
        self.members = []

    def add(self, q):
        w = _psi_value(self.psi, q)
        self.members.append(q)
        if w == 0:
            return
        snap = _certified_snapshot(self.gamma, ((q, w),))
        center = Fraction(snap.num, snap.den)
        gaps = []
        for lo, hi in self.gaps:
            cursor = lo
            n_lo = math.floor(q * lo - center - w) + 1
            n_hi = math.ceil(q * hi - center + w) - 1
            for n in range(n_lo, n_hi + 1):
                a = (n + center - w) / q
                b = (n + center + w) / q
                if a > cursor:
                    gaps.append((cursor, min(a, hi)))
                cursor = max(cursor, b)
                if cursor >= hi:
                    break
            if cursor < hi:
                gaps.append((cursor, hi))
        self.gaps = gaps

    def extend(self, qs):
        for q in qs:
            self.add(q)
        return self

    def measure(self):
        return ONE - sum((hi - lo for lo, hi in self.gaps), ZERO)

    def as_union(self):
        """The union as an IntervalUnion (complement of the gaps)."""
        out = []
        cursor = ZERO
        for lo, hi in self.gaps:
            if lo > cursor:
                out.append((cursor, lo))
            cursor = hi
        if cursor < ONE:
            out.append((cursor, ONE))
        return IntervalUnion(tuple(out))


class FixedPointSum:
    """
    Enclosure of a sum of nonnegative rationals at resolution 2^-bits.

    lo accumulates floors and hi ceilings, so lo <= true sum <= hi holds
    exactly.
    """

    def __init__(self, bits=PAIR_MASS_BITS):
        self.bits = bits
        self._lo = 0
        self._hi = 0

    def add(self, value):
        value = as_fraction(value)
        scaled = value.numerator << self.bits
        self._lo += scaled // value.denominator
        self._hi += -((-scaled) // value.denominator)
        return self

    def merge(self, other):
        if other.bits != self.bits:
            raise ValueError("resolution mismatch")
        self._lo += other._lo
        self._hi += other._hi
        return self

    @property
    def lo(self):
        return Fraction(self._lo, 1 << self.bits)

    @property
    def hi(self):
        return Fraction(self._hi, 1 << self.bits)

    def compare(self, threshold):
        """1 if certainly above threshold, -1 if certainly at or below, 0 if straddling."""
        threshold = as_fraction(threshold)
        if self.lo > threshold:
            return 1
        if self.hi <= threshold:
            return -1
        if self._lo == self._hi:
            return 1 if self.lo > threshold else -1
        return 0


# ─── Product boxes ───

@dataclass(frozen=True)
class ProductBox:
    """B_q = A_q^(gamma_1) x ... x A_q^(gamma_k)."""

    factors: Tuple[IntervalUnion, ...]

    def __post_init__(self):
        if not self.factors:
            raise ValueError("a product box needs k >= 1 factors")

    @property
    def k(self):
        return len(self.factors)

    def measure(self):
        result = ONE
        for f in self.factors:
            result *= f.measure()
        return result

    def intersect(self, other):
        if other.k != self.k:
            raise ValueError("dimension mismatch")
        return ProductBox(tuple(a.intersect(b) for a, b in zip(self.factors, other.factors)))


def box_ops(k, q, psi, gammas):
    """The box B_q for k shifts."""
    if k < 1 or len(gammas) != k:
        raise ValueError(f"need k >= 1 shifts, got k={k} and {len(gammas)} shifts")
    return ProductBox(tuple(build_Aq(q, psi, g) for g in gammas))


def box_pair_intersection_measure(q, q2, psi, gammas):
    """|B_q cap B_q'| as the product of per-coordinate pair measures."""
    result = ONE
    for g in gammas:
        g = coerce_real(g)
        result *= pairwise_intersection_measure(q, q2, psi, g).measure
        if result == 0:
            break
    return result
