"""
Rotation Orbits
===============
The orbit {q gamma}, q = 1..N, of the irrational rotation: exact interval
counts, the exact extreme discrepancy, the Erdos-Turan-Koksma bound and the
72 * N^(sigma/(1+sigma)) consequence of a finite irrationality exponent.

Points are integers X over a common denominator den with X/den the signed
fractional part in (-1/2, 1/2]; each is within err_units/den of the true
{q gamma}.
"""
import logging
from bisect import bisect_left, bisect_right, insort
from collections import namedtuple
from dataclasses import dataclass
from fractions import Fraction
from typing import Tuple

import mpmath

from .arith import as_fraction
from .errors import IndeterminateAtPrecision
from .pool import ordered_map
from .realnum import Undecided, certify, coerce_real, scaled_state, signed_numerator, sigma_of_Q
from .reports import BoundsReport

logger = logging.getLogger(__name__)

POINT_ERROR = Fraction(1, 2 ** 80)
ANCHOR_EVERY = 1 << 10
RECORD_ONLY_BELOW = 100

IntervalCount = namedtuple('IntervalCount', ['count', 'indeterminate'])


@dataclass(frozen=True)
class Orbit:
    """Certified orbit points; immutable once built."""

    gamma: object
    N: int
    den: int
    points: Tuple[int, ...]
    err_units: int

    @property
    def err(self):
        return Fraction(self.err_units, self.den)

    def point(self, q):
        """{q gamma} as a Fraction (1-based)."""
        return Fraction(self.points[q - 1], self.den)

    def sorted_points(self):
        return sorted(self.points)


def build_orbit(gamma, N):
    """
    Orbit of length N with every point certified to 2^-80.

    Points are accumulated by adding {gamma} and wrapping, and re-anchored
    from q * gamma-hat every 1024 steps.
    """
    if N < 0:
        raise ValueError("N must be >= 0")
    gamma = coerce_real(gamma)
    if N and not gamma.is_exact:
        gamma.ensure_error(POINT_ERROR / N)
    snap = gamma.snapshot()
    den = snap.den
    step = snap.num % den

    points = []
    x = 0
    for q in range(1, N + 1):
        if q % ANCHOR_EVERY == 0:
            x = (q * snap.num) % den
        else:
            x = (x + step) % den
        points.append(x - den if 2 * x > den else x)
    err_units = N * snap.err_units
    logger.debug("[Orbit] %s N=%d at %d digits", gamma.name, N, snap.digits)
    return Orbit(gamma=gamma, N=N, den=den, points=tuple(points), err_units=err_units)


def count_in_interval(orbit, lo, hi, closed=(False, False)):
    """
    #{1 <= q <= N: {q gamma} in I} for I with rational endpoints in [-1/2, 1/2].

    Points within their certified error of an endpoint are not counted and
    are reported as indeterminate.

    Args:
        closed: (left_closed, right_closed); open by default.
    """
    lo, hi = as_fraction(lo), as_fraction(hi)
    if not (Fraction(-1, 2) <= lo <= hi <= Fraction(1, 2)):
        raise ValueError(f"interval ({lo}, {hi}) is not inside [-1/2, 1/2]")
    if orbit.N == 0:
        return IntervalCount(0, 0)
    xs = orbit.sorted_points()
    L, H = lo * orbit.den, hi * orbit.den
    r = orbit.err_units
    if r == 0:
        start = bisect_left(xs, L) if closed[0] else bisect_right(xs, L)
        stop = bisect_right(xs, H) if closed[1] else bisect_left(xs, H)
        return IntervalCount(max(0, stop - start), 0)
    start = bisect_right(xs, L + r)
    stop = bisect_left(xs, H - r)
    count = max(0, stop - start)
    near = set(range(bisect_left(xs, L - r), bisect_right(xs, L + r)))
    near |= set(range(bisect_left(xs, H - r), bisect_right(xs, H + r)))
    return IntervalCount(count, len(near))


def _discrepancy_sorted(xs, den):
    """D_N from sorted signed numerators, over half-open subintervals of the torus cut at 1/2."""
    n = len(xs)
    if n == 0:
        return Fraction(0)
    two_den = 2 * den
    values = [i * two_den - n * (2 * x + den) for i, x in enumerate(xs, start=1)]
    return Fraction(two_den + max(values) - min(values), two_den * n)


def _has_collision(xs, err_units, den):
    if not err_units or not xs:
        return False
    # the first and last points are neighbours across the cut at 1/2
    return any(b - a <= 2 * err_units for a, b in zip(xs, xs[1:])) or (xs[0] + den) - xs[-1] <= 2 * err_units


def exact_discrepancy(orbit):
    """
    sup over intervals I of |#{q: {q gamma} in I}/N - |I||, exactly.

    The critical-endpoint formula on the sorted points. If two points are
    within twice the error bound, gamma is refined and the orbit rebuilt.

    Raises:
        IndeterminateAtPrecision: if points still collide at the cap.
    """
    while True:
        xs = orbit.sorted_points()
        if not _has_collision(xs, orbit.err_units, orbit.den):
            return _discrepancy_sorted(xs, orbit.den)
        logger.info("[Orbit] N=%d: close points, refining %s", orbit.N, orbit.gamma.name)
        orbit.gamma.refine()
        orbit = build_orbit(orbit.gamma, orbit.N)


def brute_force_discrepancy(orbit):
    """
    O(N^2) cross-check: every interval with endpoints at orbit points or the
    boundary, taken closed (to count a surplus) and open (for a deficit).
    """
    xs = orbit.sorted_points()
    n = len(xs)
    if n == 0:
        return Fraction(0)
    ys = [Fraction(2 * x + orbit.den, 2 * orbit.den) for x in xs]
    edges = sorted(set([Fraction(0)] + ys + [Fraction(1)]))
    best = Fraction(0)
    for i, a in enumerate(edges):
        first_ge = bisect_left(ys, a)
        first_gt = bisect_right(ys, a)
        for b in edges[i:]:
            closed_count = bisect_right(ys, b) - first_ge
            open_count = max(0, bisect_left(ys, b) - first_gt)
            length = b - a
            best = max(best, Fraction(closed_count, n) - length, length - Fraction(open_count, n))
    return best


def discrepancy_series(gamma, N_values):
    """Exact D_N for each N in N_values from one growing sorted orbit."""
    N_values = sorted(set(N_values))
    if not N_values:
        return {}
    orbit = build_orbit(gamma, N_values[-1])
    while _has_collision(orbit.sorted_points(), orbit.err_units, orbit.den):
        orbit.gamma.refine()
        orbit = build_orbit(orbit.gamma, orbit.N)
    wanted = set(N_values)
    xs = []
    series = {}
    for N, x in enumerate(orbit.points, start=1):
        insort(xs, x)
        if N in wanted:
            series[N] = _discrepancy_sorted(xs, orbit.den)
    return series


def etk_bound(gamma, N, H):
    """
    3 * (1/H + sum_{h=1}^{H} 4/(N h ||h gamma||)).

    Uses the upper enclosure of each ||h gamma||, so the returned Fraction
    never exceeds the true bound.

    Raises:
        IndeterminateAtPrecision: if some ||h gamma|| cannot be certified
            nonzero.
    """
    if N < 1 or H < 1:
        raise ValueError("etk_bound needs N, H >= 1")
    gamma = coerce_real(gamma)

    def attempt(snap):
        total = Fraction(0)
        for h in range(1, H + 1):
            num, den, rad = scaled_state(h, snap)
            dist = abs(signed_numerator(num, den))
            if dist <= rad:
                if rad == 0:
                    raise IndeterminateAtPrecision(f"||{h} gamma|| = 0")
                raise Undecided
            total += Fraction(4 * den, N * h * (dist + rad))
        return 3 * (Fraction(1, H) + total)

    return certify(attempt, gamma)


def bound_72(N, sigma):
    """72 * N^(sigma/(1+sigma)) as an mpf."""
    with mpmath.workdps(30):
        s = mpmath.mpf(sigma)
        return 72 * mpmath.power(N, s / (1 + s))


def verify_72_bound(gamma, N_range, Q, sigma_mode='Q', H=None, threads=None):
    """
    N * D(N) against 72 * N^(sigma/(1+sigma)) for each N in N_range.

    sigma is the certified lower end of sigma(Q) (sigma_mode='Q') or of
    sigma(N) (sigma_mode='N'). N < 100 is recorded without a verdict.
    If H is given, the row also carries etk_bound(gamma, N, H).

    Returns:
        BoundsReport with columns N, exact_discrepancy, etk_bound, bound_72,
        pass; bound_72 is on the discrepancy scale, 72 * N^(sigma/(1+sigma)) / N.
    """
    if sigma_mode not in ('Q', 'N'):
        raise ValueError("sigma_mode must be 'Q' or 'N'")
    gamma = coerce_real(gamma)
    N_range = sorted(set(N_range))
    if any(N < 1 or N > Q for N in N_range):
        raise ValueError(f"N_range must lie in [1, Q={Q}]")
    sigma_Q = sigma_of_Q(gamma, max(Q, 2)).sigma_lo
    series = discrepancy_series(gamma, N_range)

    def row(N):
        sigma = sigma_Q if sigma_mode == 'Q' else sigma_of_Q(gamma, max(N, 2)).sigma_lo
        D = series[N]
        with mpmath.workdps(30):
            rhs = bound_72(N, sigma)
            verdict = None if N < RECORD_ONLY_BELOW else bool(mpmath.mpf(D.numerator * N) / D.denominator <= rhs)
            normalized = float(mpmath.mpf(D.numerator * N) / D.denominator / mpmath.power(N, sigma / (1 + sigma)))
        return {
            'N': N,
            'exact_discrepancy': D,
            'etk_bound': etk_bound(gamma, N, H) if H else None,
            'bound_72': float(rhs / N),
            'pass': verdict,
            'sigma': sigma,
            'normalized': normalized,
        }

    report = BoundsReport('discrepancy', ['N', 'exact_discrepancy', 'etk_bound', 'bound_72', 'pass'])
    envelope = 0.0
    for r in ordered_map(row, N_range, threads):
        envelope = max(envelope, r['normalized'])
        r['envelope'] = envelope
        report.rows.append(r)
    report.fitted['sigma_Q'] = sigma_Q
    report.fitted['max_normalized'] = envelope
    if any(N < RECORD_ONLY_BELOW for N in N_range):
        report.notes.append(f"N < {RECORD_ONLY_BELOW} recorded without a verdict")
    return report
