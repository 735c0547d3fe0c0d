"""
Certified Reals
===============
Real shifts gamma (and beta) carried as a rational approximation num/den
with a certified absolute error, refinable on demand by doubling the number
of decimal digits up to the configured cap.

On top of that: signed fractional parts, distance to the nearest integer,
continued fractions, the finite irrationality exponent sigma(Q), the
tamely/wildly Liouville label at a truncation, and the L_gamma scan.

Decisions that land inside the error ball raise Undecided internally; the
certify() loop refines and retries, and IndeterminateAtPrecision escapes
only once the precision cap is reached.
"""
import logging
import math
import threading
from collections import namedtuple
from dataclasses import dataclass
from fractions import Fraction
from typing import Callable, List, Optional, Tuple

import mpmath

from .arith import as_fraction, get_sieve
from .errors import IndeterminateAtPrecision, RangeExceeded

logger = logging.getLogger(__name__)

PRESETS = ('sqrt2', 'golden', 'e', 'pi', 'ln2', 'liouville')

Snapshot = namedtuple('Snapshot', ['num', 'den', 'err', 'err_units', 'digits'])
LiouvilleScan = namedtuple('LiouvilleScan', ['members', 'indeterminate'])


class Undecided(Exception):
    """A comparison fell inside the current error ball."""


def _get_config():
    """Get the module config (avoids circular imports)."""
    from . import get_module_config
    return get_module_config()


@dataclass(frozen=True)
class Ball:
    """Closed ball [center - radius, center + radius] with rational data."""

    center: Fraction
    radius: Fraction

    @property
    def lo(self):
        return self.center - self.radius

    @property
    def hi(self):
        return self.center + self.radius

    def __contains__(self, x):
        return self.lo <= x <= self.hi


class CertifiedReal:
    """
    A real number known as num/den with |true - num/den| <= err.

    The state tuple is replaced atomically under a lock, so concurrent
    readers always see a consistent (num, den, err) triple.
    """

    def __init__(self, name, refiner, digits=None, refinable=True):
        self.name = name
        self._refiner = refiner
        self.refinable = refinable
        self._lock = threading.Lock()
        start = digits if digits is not None else _get_config().PRECISION_DIGITS
        self._state = self._make_state(start)

    def _make_state(self, digits):
        num, den, err = self._refiner(digits)
        err = Fraction(err)
        err_units = -((-err.numerator * den) // err.denominator)
        return Snapshot(num, den, err, err_units, digits)

    @classmethod
    def exact(cls, value, name=None):
        """An exactly known rational, never refined."""
        value = as_fraction(value)
        return cls(name or str(value), lambda digits: (value.numerator, value.denominator, 0),
                   refinable=False)

    @classmethod
    def fixed(cls, approx, err, name=None):
        """A decimal known only to the given error; refinement is impossible."""
        approx, err = as_fraction(approx), as_fraction(err)
        if err < 0:
            raise ValueError("error bound must be nonnegative")
        return cls(name or f"{approx}:{err}",
                   lambda digits: (approx.numerator, approx.denominator, err),
                   refinable=False)

    # ─── State access ───

    def snapshot(self):
        return self._state

    @property
    def approx(self):
        s = self._state
        return Fraction(s.num, s.den)

    @property
    def err(self):
        return self._state.err

    @property
    def digits(self):
        return self._state.digits

    @property
    def is_exact(self):
        return self._state.err == 0

    @property
    def key(self):
        """Identifies the current approximation, for cache keys."""
        return f"{self.name}@{self.digits}"

    def ball(self):
        return Ball(self.approx, self.err)

    def refine(self, digits=None):
        """
        Tighten the approximation, doubling digits by default.

        Raises:
            IndeterminateAtPrecision: at the precision cap, or if the value
                cannot be refined at all.
        """
        cap = _get_config().PRECISION_CAP
        with self._lock:
            current = self._state.digits
            if self._state.err == 0:
                return self._state
            if not self.refinable:
                raise IndeterminateAtPrecision(
                    f"{self.name} is known only to error {self._state.err}", digits=current)
            if current >= cap:
                raise IndeterminateAtPrecision(
                    f"{self.name}: precision cap of {cap} digits reached", digits=current)
            target = min(cap, digits if digits is not None else 2 * current)
            if target > current:
                self._state = self._make_state(target)
                logger.debug("[Real] %s refined to %d digits", self.name, target)
            return self._state

    def ensure_error(self, bound):
        """Refine until err <= bound."""
        bound = as_fraction(bound)
        while self._state.err > bound:
            self.refine()
        return self._state

    def __repr__(self):
        return f"CertifiedReal({self.name!r}, digits={self.digits}, err<={float(self.err):.3g})"


def certify(attempt, *reals):
    """
    Call attempt(*snapshots) until it stops raising Undecided.

    Every real is refined between attempts; IndeterminateAtPrecision from
    refine() ends the loop.
    """
    while True:
        try:
            return attempt(*(x.snapshot() for x in reals))
        except Undecided:
            progressed = False
            for x in reals:
                if not x.is_exact:
                    x.refine()
                    progressed = True
            if not progressed:
                raise IndeterminateAtPrecision("undecidable with exact inputs")


# ─── Presets ───

def _sqrt2(digits):
    scale = 10 ** digits
    return math.isqrt(2 * scale * scale), scale, Fraction(1, scale)


def _golden(digits):
    scale = 10 ** digits
    s = math.isqrt(5 * scale * scale)
    return scale + s, 2 * scale, Fraction(1, 2 * scale)


def _e(digits):
    scale = 10 ** digits
    m = 2
    fact = 2
    while fact <= 100 * scale:
        m += 1
        fact *= m
    # sum_{k<=m} m!/k!, then e ~ total/m! with tail < 2/(m+1)!
    total, term = 0, 1
    for k in range(m, -1, -1):
        total += term
        term *= k
    return (total * scale) // fact, scale, Fraction(2, scale)


def _mp_constant(getter):
    def refiner(digits):
        scale = 10 ** digits
        with mpmath.workdps(digits + 20):
            num = int(mpmath.floor(getter() * scale))
        return num, scale, Fraction(2, scale)
    return refiner


def _liouville(digits):
    n = 1
    while math.factorial(n + 1) <= digits:
        n += 1
    scale = 10 ** max(digits, math.factorial(n))
    num = sum(scale // 10 ** math.factorial(k) for k in range(1, n + 1))
    return num, scale, Fraction(2, 10 ** math.factorial(n + 1))


_REFINERS = {
    'sqrt2': _sqrt2,
    'golden': _golden,
    'e': _e,
    'pi': _mp_constant(lambda: mpmath.pi),
    'ln2': _mp_constant(lambda: mpmath.ln2),
    'liouville': _liouville,
}

_presets = {}
_presets_lock = threading.Lock()


def reset_presets():
    """Forget every refinement of the shared preset constants."""
    with _presets_lock:
        _presets.clear()


def preset(name):
    """The shared CertifiedReal for a named constant."""
    if name not in _REFINERS:
        raise ValueError(f"unknown constant {name!r}; choose one of {', '.join(PRESETS)}")
    with _presets_lock:
        if name not in _presets:
            _presets[name] = CertifiedReal(name, _REFINERS[name])
        return _presets[name]


def parse_real(text):
    """
    Parse a CLI/config real: a preset name, 'p/q', an exact decimal, or
    'decimal:err' (e.g. '1.41421356:1e-8').
    """
    if isinstance(text, CertifiedReal):
        return text
    if not isinstance(text, str):
        return CertifiedReal.exact(text)
    text = text.strip()
    if text in _REFINERS:
        return preset(text)
    try:
        if ':' in text:
            approx, err = text.split(':', 1)
            return CertifiedReal.fixed(approx, err, name=text)
        return CertifiedReal.exact(as_fraction(text), name=text)
    except (ValueError, ArithmeticError) as e:
        raise ValueError(f"cannot parse real {text!r}: {e}") from e


def coerce_real(x):
    """CertifiedReal passthrough; rationals become exact reals."""
    return x if isinstance(x, CertifiedReal) else parse_real(x)


# ─── Fractional parts ───

def signed_numerator(x, den):
    """The integer X with X/den = {x/den}, X in (-den/2, den/2]."""
    r = x % den
    return r - den if 2 * r > den else r


def scaled_state(m, snap, minus=None):
    """
    (num, den, err_units) for m*x, or m*x - y when `minus` is y's snapshot.
    The error of the result is at most err_units/den.
    """
    if minus is None:
        return m * snap.num, snap.den, abs(m) * snap.err_units
    num = m * snap.num * minus.den - minus.num * snap.den
    den = snap.den * minus.den
    err_units = abs(m) * snap.err_units * minus.den + minus.err_units * snap.den
    return num, den, err_units


def _signed_frac_exact(value):
    n = math.ceil(value - Fraction(1, 2))
    return value - n


def _signed_frac_ball(snap, multiplier, shift):
    center = Fraction(multiplier * snap.num, snap.den) + shift
    radius = abs(multiplier) * snap.err
    n = math.ceil(center - Fraction(1, 2))
    if radius and (center - radius <= n - Fraction(1, 2) or center + radius > n + Fraction(1, 2)):
        raise Undecided
    return Ball(center - n, radius)


def signed_frac(x, multiplier=1, shift=0):
    """
    {multiplier*x + shift} in (-1/2, 1/2].

    Exact for rational x (returns a Fraction); for a CertifiedReal returns
    a Ball around the fractional part, refining x until the integer part is
    certain.
    """
    shift = as_fraction(shift)
    if isinstance(x, CertifiedReal):
        if x.is_exact:
            return Ball(_signed_frac_exact(multiplier * x.approx + shift), Fraction(0))
        return certify(lambda s: _signed_frac_ball(s, multiplier, shift), x)
    return _signed_frac_exact(multiplier * as_fraction(x) + shift)


def dist_to_int(x, multiplier=1, shift=0):
    """||multiplier*x + shift||, the distance to the nearest integer."""
    f = signed_frac(x, multiplier, shift)
    if isinstance(f, Ball):
        return Ball(abs(f.center), f.radius)
    return abs(f)


# ─── Continued fractions ───

@dataclass(frozen=True)
class ContinuedFraction:
    """Certified partial quotients and convergents of a real."""

    quotients: Tuple[int, ...]
    convergents: Tuple[Tuple[int, int], ...]
    complete: bool
    terminated: bool = False


def convergents_of(quotients):
    """Convergents (p_i, q_i) for a list of partial quotients."""
    result = []
    p_prev, p = 0, 1
    q_prev, q = 1, 0
    for a in quotients:
        p_prev, p = p, a * p + p_prev
        q_prev, q = q, a * q + q_prev
        result.append((p, q))
    return result


def _cf_prefix(lo, hi, n_terms):
    """Partial quotients shared by every real in [lo, hi]; (quotients, decided, terminated)."""
    quotients = []
    exact = lo == hi
    for _ in range(n_terms):
        a = math.floor(lo)
        if exact:
            quotients.append(a)
            rest = lo - a
            if rest == 0:
                return quotients, True, True
            lo = hi = 1 / rest
            continue
        if math.floor(hi) != a or lo == a:
            return quotients, False, False
        quotients.append(a)
        lo, hi = 1 / (hi - a), 1 / (lo - a)
    return quotients, True, False


def cf_expand(gamma, n_terms):
    """
    First n_terms partial quotients of gamma, each certified.

    If the precision cap is reached mid-expansion the certified prefix is
    returned with complete=False.
    """
    if n_terms < 1:
        raise ValueError("n_terms must be positive")
    gamma = coerce_real(gamma)
    while True:
        ball = gamma.ball()
        quotients, decided, terminated = _cf_prefix(ball.lo, ball.hi, n_terms)
        if decided:
            break
        try:
            gamma.refine()
        except IndeterminateAtPrecision:
            logger.warning("[CF] %s: expansion stopped after %d certified terms", gamma.name, len(quotients))
            return ContinuedFraction(tuple(quotients), tuple(convergents_of(quotients)), complete=False)
    return ContinuedFraction(tuple(quotients), tuple(convergents_of(quotients)),
                             complete=True, terminated=terminated)


# ─── Irrationality exponent at a truncation ───

@dataclass(frozen=True)
class SigmaProfile:
    """sigma(Q) with its witness and the provisional Liouville label."""

    Q: int
    sigma: float
    sigma_lo: float
    sigma_hi: float
    witness: int
    threshold: float
    classification: str
    provisional: bool = True


LOG_RATIO_DPS = 40


def _outward(value, direction):
    """mpf -> float, widened past the mpmath rounding error in the given direction."""
    if not direction:
        return float(value)
    value *= 1 + direction * mpmath.mpf(10) ** (8 - LOG_RATIO_DPS)
    return math.nextafter(float(value), direction * math.inf)


def _log_ratio(den, dist, q, direction=0):
    """log(den/dist)/log(q); inf when dist == 0, rounded outward when direction is -1 or +1."""
    if dist <= 0:
        return math.inf
    with mpmath.workdps(LOG_RATIO_DPS):
        return _outward(mpmath.log(mpmath.mpf(den) / dist) / mpmath.log(q), direction)


def _tame_threshold(Q, direction=0):
    with mpmath.workdps(LOG_RATIO_DPS):
        return _outward(mpmath.root(mpmath.log(Q, 2), 4), direction)


def _sigma_scan(gamma, Q):
    """Per-q (ratio, ratio_lo, ratio_hi) for 2 <= q <= Q on one certified snapshot."""
    def attempt(snap):
        rows = []
        for q in range(2, Q + 1):
            num, den, rad = scaled_state(q, snap)
            dist = abs(signed_numerator(num, den))
            if rad and dist <= rad:
                raise Undecided
            rows.append((_log_ratio(den, dist, q),
                         _log_ratio(den, dist + rad, q, -1),
                         _log_ratio(den, dist - rad, q, 1)))
        return rows
    return certify(attempt, gamma)


def sigma_of_Q(gamma, Q):
    """
    sigma(Q) = max over 2 <= q <= Q of log(1/||q gamma||)/log q.

    The scan starts at q = 2. The label is 'tamely' if sigma(Q) <=
    (log2 Q)^(1/4), 'wildly' if above, 'indeterminate' if the certified
    enclosure straddles the threshold.
    """
    if Q < 2:
        raise ValueError("sigma_of_Q needs Q >= 2")
    gamma = coerce_real(gamma)
    rows = _sigma_scan(gamma, Q)
    best = max(range(len(rows)), key=lambda i: (rows[i][0], -i))
    sigma_lo = max(r[1] for r in rows)
    sigma_hi = max(r[2] for r in rows)
    threshold = _tame_threshold(Q)
    if sigma_hi <= _tame_threshold(Q, -1):
        label = 'tamely'
    elif sigma_lo > _tame_threshold(Q, 1):
        label = 'wildly'
    else:
        label = 'indeterminate'
    return SigmaProfile(Q=Q, sigma=rows[best][0], sigma_lo=sigma_lo, sigma_hi=sigma_hi,
                        witness=best + 2, threshold=threshold, classification=label)


def sigma_running(gamma, Q):
    """Running sigma(n) for n = 0..Q (entries 0 and 1 are 0.0)."""
    gamma = coerce_real(gamma)
    running = [0.0, 0.0]
    current = 0.0
    for ratio, _, _ in _sigma_scan(gamma, Q):
        current = max(current, ratio)
        running.append(current)
    return running


def in_liouville_set(gamma, Q, sigma):
    """
    Certified test of ||Q gamma|| < Q^(-sigma).

    For exactly rational gamma only ||Q gamma|| = 0 qualifies: the defining
    inequality at finite sigma also admits Q below the denominator, which
    drops out as sigma grows.

    Returns:
        True, False, or None if undecidable at the precision cap.
    """
    if sigma < 1:
        raise ValueError(f"sigma must be a positive integer, got {sigma}")
    bound = Q ** sigma

    def attempt(snap):
        num, den, rad = scaled_state(Q, snap)
        dist = abs(signed_numerator(num, den))
        if rad == 0:
            return dist == 0 if gamma.is_exact else dist * bound < den
        if (dist + rad) * bound < den:
            return True
        if max(dist - rad, 0) * bound >= den:
            return False
        raise Undecided

    try:
        return certify(attempt, gamma)
    except IndeterminateAtPrecision:
        return None


def liouville_set_scan(gamma, Q_max, sigma_fn: Callable[[int], int]):
    """
    All Q <= Q_max with ||Q gamma|| < Q^(-sigma_fn(Q)).

    Returns:
        LiouvilleScan(members, indeterminate)
    """
    gamma = coerce_real(gamma)
    members, indeterminate = [], []
    previous = 0
    for Q in range(1, Q_max + 1):
        s = int(sigma_fn(Q))
        if s < 1 or s < previous:
            raise ValueError(f"sigma_fn must be positive and nondecreasing (sigma_fn({Q}) = {s})")
        previous = s
        verdict = in_liouville_set(gamma, Q, s)
        if verdict is None:
            indeterminate.append(Q)
        elif verdict:
            members.append(Q)
    return LiouvilleScan(members, indeterminate)


@dataclass(frozen=True)
class SlowGrowthReport:
    """Finite-Q diagnostic of the slow-growth condition on d(q)."""

    Q: int
    sigma: int
    q_bound: int
    max_d: int
    witness: Optional[int]
    ratio: float
    member: Optional[bool]


def slow_growth_check(gamma, Q, psi, sigma):
    """
    (max d(q) over q <= Q^(sigma/2) with psi(q) != 0) * log2 Q / Q^(2/sigma).

    Args:
        gamma: the shift; its L_gamma membership at (Q, sigma) is recorded.
        Q: a denominator from liouville_set_scan.
        psi: ApproxFunction (its support is what matters).
        sigma: the integer exponent sigma(Q).

    Raises:
        RangeExceeded: if Q^(sigma/2) is beyond the sieve limit.
    """
    sigma = int(sigma)
    if sigma < 1:
        raise ValueError("sigma must be a positive integer")
    q_bound = math.isqrt(Q ** sigma)
    limit = _get_config().SIEVE_LIMIT
    if q_bound > limit:
        raise RangeExceeded(f"Q^(sigma/2) = {q_bound} exceeds the sieve limit {limit}")

    table = get_sieve(q_bound)
    support = psi.support_mask(1, q_bound)
    d = table.d[1:q_bound + 1]
    if support.any():
        masked = d * support
        idx = int(masked.argmax())
        max_d, witness = int(masked[idx]), idx + 1
    else:
        max_d, witness = 0, None
    ratio = max_d * math.log2(Q) / Q ** (2 / sigma)
    member = in_liouville_set(coerce_real(gamma), Q, sigma) if gamma is not None else None
    return SlowGrowthReport(Q=Q, sigma=sigma, q_bound=q_bound, max_d=max_d,
                            witness=witness, ratio=ratio, member=member)
