"""
Arithmetic Kernels
==================
gcd-adjacent number theory used throughout the verifiers: factorization,
Euler phi, divisor count d, prime-power count Omega, the divisor-sum weight
F(q) = sum_{r|q} log2(r)/r, support sieves, the D_l weight classes and the
zeta constants behind the F-moment bound.

Bulk work goes through an immutable SieveTable built with numpy; single
values above the sieve limit fall back to trial division.
"""
import logging
import math
import threading
from collections import namedtuple
from dataclasses import dataclass
from decimal import Decimal
from fractions import Fraction
from typing import Optional, Tuple

import mpmath
import numpy as np

logger = logging.getLogger(__name__)

FValue = namedtuple('FValue', ['value', 'err'])
TailCount = namedtuple('TailCount', ['count', 'indeterminate'])

# Bits of working precision for single F(q) evaluations.
F_PRECISION_BITS = 64


def as_fraction(x):
    """Coerce ints, Fractions, decimal strings, 'p/q' strings and floats to Fraction."""
    if isinstance(x, Fraction):
        return x
    if isinstance(x, int):
        return Fraction(x)
    if isinstance(x, float):
        # Read the shortest repr, so 0.1 means 1/10 and not its binary neighbour.
        return Fraction(Decimal(repr(x)))
    if isinstance(x, Decimal):
        return Fraction(x)
    if isinstance(x, str):
        text = x.strip()
        if '/' in text:
            return Fraction(text)
        return Fraction(Decimal(text))
    raise TypeError(f"cannot interpret {x!r} as a rational number")


# ─── Factorization ───

@dataclass(frozen=True)
class FactoredInt:
    """A positive integer with its prime factorization."""

    value: int
    factors: Tuple[Tuple[int, int], ...]

    def __post_init__(self):
        product = 1
        last = 1
        for p, e in self.factors:
            if p <= last or e < 1:
                raise ValueError(f"invalid factorization of {self.value}: {self.factors}")
            product *= p ** e
            last = p
        if product != self.value:
            raise ValueError(f"factors {self.factors} do not multiply to {self.value}")

    @property
    def phi(self):
        result = 1
        for p, e in self.factors:
            result *= (p - 1) * p ** (e - 1)
        return result

    @property
    def d(self):
        result = 1
        for _, e in self.factors:
            result *= e + 1
        return result

    @property
    def omega(self):
        return sum(e for _, e in self.factors)

    def divisors(self):
        """All divisors in increasing order."""
        divs = [1]
        for p, e in self.factors:
            divs = [x * p ** k for x in divs for k in range(e + 1)]
        return sorted(divs)


@dataclass(frozen=True, eq=False)
class SieveTable:
    """Arithmetic functions tabulated on 0..limit (index 0 unused)."""

    limit: int
    phi: np.ndarray
    d: np.ndarray
    omega: np.ndarray
    spf: np.ndarray

    @classmethod
    def from_arrays(cls, limit, phi, d, omega, spf):
        arrays = []
        for arr in (phi, d, omega, spf):
            arr = np.asarray(arr, dtype=np.int64)
            if arr.shape != (limit + 1,):
                raise ValueError(f"sieve array has shape {arr.shape}, expected {(limit + 1,)}")
            arr.setflags(write=False)
            arrays.append(arr)
        return cls(limit, *arrays)

    def covers(self, n):
        return n <= self.limit

    def factor(self, q):
        """Factor q <= limit by repeated smallest-prime-factor lookup."""
        factors = []
        n = q
        while n > 1:
            p = int(self.spf[n])
            e = 0
            while n % p == 0:
                n //= p
                e += 1
            factors.append((p, e))
        return FactoredInt(q, tuple(factors))


def build_sieve(limit):
    """
    Build phi, d, Omega and smallest-prime-factor arrays up to limit.

    Args:
        limit: Largest tabulated integer (>= 1).

    Returns:
        SieveTable: immutable table.
    """
    if limit < 1:
        raise ValueError("sieve limit must be >= 1")
    size = limit + 1

    spf = np.zeros(size, dtype=np.int64)
    for p in range(2, math.isqrt(limit) + 1):
        if spf[p] == 0:
            block = spf[p * p::p]
            block[block == 0] = p
    idx = np.arange(size, dtype=np.int64)
    unset = spf == 0
    unset[:2] = False
    spf[unset] = idx[unset]
    spf[1] = 1
    primes = np.nonzero(spf[2:] == idx[2:])[0] + 2

    phi = idx.copy()
    d = np.ones(size, dtype=np.int64)
    omega = np.zeros(size, dtype=np.int64)
    d[0] = 0
    for p in primes.tolist():
        multiples = phi[p::p]
        multiples -= multiples // p
        # exponent of p in p*(m+1), m = 0 .. limit//p - 1
        e = np.zeros(limit // p, dtype=np.int64)
        step, pk = 1, p
        while pk <= limit:
            e[step - 1::step] += 1
            step *= p
            pk *= p
        d[p::p] *= e + 1
        omega[p::p] += e

    logger.info("[Sieve] built table up to %d (%d primes)", limit, len(primes))
    return SieveTable.from_arrays(limit, phi, d, omega, spf)


# ─── Table registry ───
_tables = []
_f_tables = []
_registry_lock = threading.Lock()


def _get_config():
    """Get the module config (avoids circular imports)."""
    from . import get_module_config
    return get_module_config()


def _covering_table(n):
    for table in _tables:
        if table.covers(n):
            return table
    return None


def get_sieve(limit=None):
    """
    Return a SieveTable covering at least `limit`.

    Reuses any table already built, then the on-disk cache, and builds a new
    table only as a last resort.

    Raises:
        RangeExceeded: if limit exceeds the configured sieve limit.
    """
    from .errors import RangeExceeded
    from .storage import load_sieve, save_sieve

    config = _get_config()
    limit = config.SIEVE_LIMIT if limit is None else int(limit)
    if limit > config.SIEVE_LIMIT:
        raise RangeExceeded(f"tables up to {limit} requested; sieve limit is {config.SIEVE_LIMIT}")

    with _registry_lock:
        table = _covering_table(limit)
        if table is not None:
            return table
        try:
            table = load_sieve(config.SIEVE_CACHE_PATH)
        except ValueError as e:
            logger.warning("[Sieve] ignoring cache file: %s", e)
            table = None
        if table is None or not table.covers(limit):
            table = build_sieve(limit)
            try:
                save_sieve(table, config.SIEVE_CACHE_PATH)
            except OSError as e:
                logger.warning("[Sieve] could not write cache file: %s", e)
        _tables.append(table)
        _tables.sort(key=lambda t: t.limit)
        return table


def clear_tables():
    """Drop all in-process sieve and F tables."""
    with _registry_lock:
        _tables.clear()
        _f_tables.clear()


def factor(q):
    """Factor a positive integer; trial division above the sieve."""
    if q < 1:
        raise ValueError(f"factor() needs q >= 1, got {q}")
    table = _covering_table(q)
    if table is not None:
        return table.factor(q)

    factors = []
    n = q
    p = 2
    while p * p <= n:
        if n % p == 0:
            e = 0
            while n % p == 0:
                n //= p
                e += 1
            factors.append((p, e))
        p += 1 if p == 2 else 2
    if n > 1:
        factors.append((n, 1))
    return FactoredInt(q, tuple(factors))


def euler_phi(q):
    table = _covering_table(q)
    return int(table.phi[q]) if table is not None else factor(q).phi


def divisor_count(q):
    table = _covering_table(q)
    return int(table.d[q]) if table is not None else factor(q).d


def big_omega(q):
    table = _covering_table(q)
    return int(table.omega[q]) if table is not None else factor(q).omega


def divisors(q):
    return factor(q).divisors()


def divisor_sigma(q):
    """Sum of the divisors of q."""
    result = 1
    for p, e in factor(q).factors:
        result *= (p ** (e + 1) - 1) // (p - 1)
    return result


# ─── Divisor-sum weight F ───

def F(q):
    """
    F(q) = sum over divisors r of q of log2(r)/r.

    Evaluated at 64-bit binary precision with mpmath.

    Returns:
        FValue(value, err): value as an mpf, err an absolute bound
        (<= d(q) * 2^-50; exactly 0 for q = 1).
    """
    if q < 1:
        raise ValueError(f"F() needs q >= 1, got {q}")
    divs = divisors(q)
    with mpmath.workprec(F_PRECISION_BITS):
        total = mpmath.mpf(0)
        for r in divs[1:]:
            total += mpmath.log(r, 2) / r
    err = mpmath.ldexp(len(divs) - 1, -56)
    return FValue(total, err)


def f_table(n):
    """
    Tabulate F on 0..n as extended-precision floats.

    Returns:
        (values, errs): np.longdouble arrays; errs bound the absolute error of
        each entry from the accumulated rounding (0 at q = 1).
    """
    with _registry_lock:
        for values, errs in _f_tables:
            if len(values) > n:
                return values, errs

    d = get_sieve(n).d[:n + 1].astype(np.longdouble)
    weights = np.zeros(n + 1, dtype=np.longdouble)
    r = np.arange(2, n + 1, dtype=np.longdouble)
    weights[2:] = np.log2(r) / r

    values = np.zeros(n + 1, dtype=np.longdouble)
    root = math.isqrt(n)
    for r in range(2, root + 1):
        values[r::r] += weights[r]
    # divisors above sqrt(n): fixed multiplier j, vectorized over r
    for j in range(1, n // (root + 1) + 1):
        hi = n // j
        if hi <= root:
            break
        rs = np.arange(root + 1, hi + 1)
        values[j * rs] += weights[rs]

    eps = np.finfo(np.longdouble).eps
    errs = np.maximum(d - 1, 0) * (values + 1) * (4 * eps)
    values.setflags(write=False)
    errs.setflags(write=False)
    logger.info("[Sieve] F table up to %d (mantissa %d bits)", n, np.finfo(np.longdouble).nmant + 1)

    with _registry_lock:
        _f_tables.append((values, errs))
        _f_tables.sort(key=lambda pair: len(pair[0]))
    return values, errs


def compare_with_margin(value, err, threshold):
    """
    Compare value (known to +-err) against threshold.

    Returns:
        1 if certainly above, -1 if certainly below or equal, 0 if within the
        margin. With err == 0 the comparison is exact and never 0.
    """
    if err == 0:
        return 1 if value > threshold else -1
    if value - err > threshold:
        return 1
    if value + err <= threshold:
        return -1
    return 0


def f_tail_count(Q, threshold):
    """
    Count q <= Q with F(q) > threshold.

    Entries whose value lies within their certified error of the threshold
    are not counted; they are returned separately as indeterminate.

    Returns:
        TailCount(count, indeterminate)
    """
    if Q < 16:
        raise ValueError(f"f_tail_count needs Q >= 16, got {Q}")
    values, errs = f_table(Q)
    v = values[1:Q + 1]
    e = errs[1:Q + 1]
    t = np.longdouble(float(threshold))
    exact = e == 0
    above = np.where(exact, v > t, v - e > t)
    below = np.where(exact, v <= t, v + e <= t)
    count = int(np.count_nonzero(above))
    indeterminate = int(Q - count - np.count_nonzero(below))
    return TailCount(count, indeterminate)


# ─── Support filters and weight classes ───

def omega_support_filter(q, epsilon):
    """
    True iff Omega(q) <= (log2 q)^(1/2 + epsilon).

    Near-equality (within 2^-40) is re-decided at 120 digits; values still
    indistinguishable there are treated as equal, which passes the filter.
    """
    eps = as_fraction(epsilon)
    if eps <= 0:
        raise ValueError("epsilon must be positive")
    if q < 3:
        return True
    count = big_omega(q)
    exponent_num, exponent_den = 2 * eps.numerator + eps.denominator, 2 * eps.denominator

    def bound(digits):
        with mpmath.workdps(digits):
            exponent = mpmath.mpf(exponent_num) / exponent_den
            return mpmath.power(mpmath.log(q, 2), exponent)

    with mpmath.workdps(30):
        gap = count - bound(30)
        if abs(gap) > mpmath.ldexp(1, -40):
            return bool(gap < 0)
    with mpmath.workdps(120):
        gap = count - bound(120)
        if abs(gap) > mpmath.mpf(10) ** -100:
            return bool(gap < 0)
    return True


def dl_index(q):
    """The l with q/phi(q) in [2^l, 2^(l+1))."""
    if q < 1:
        raise ValueError("dl_index needs q >= 1")
    return (q // euler_phi(q)).bit_length() - 1


def divisor_class_index(q):
    """The l with d(q) in [2^l, 2^(l+1)): the weight classes of the one-dimensional case."""
    if q < 1:
        raise ValueError("divisor_class_index needs q >= 1")
    return divisor_count(q).bit_length() - 1


# ─── Zeta constants ───

@dataclass(frozen=True)
class ZetaConstants:
    """
    Constants of the F-moment argument for one K.

    C bounds -zeta'(1 + 1/K) <= C K^2; C_log2 is the same bound for the
    base-2 weights F uses, i.e. sum_r log2(r) / r^(1+1/K) = C_log2 K^2.
    Both are rounded up by the certified error.
    """

    K: int
    zeta2: float
    zeta_k_minus_1: Optional[float]
    neg_zeta_prime: float
    C: float
    C_log2: float
    err: float = 1e-10


def zeta_constants(K):
    """
    zeta(2), zeta(K-1) (K >= 4), and the constant C of the moment bound.

    Raises:
        ValueError: if K < 2.
    """
    if K < 2:
        raise ValueError(f"zeta_constants needs K >= 2, got {K}")
    err = 1e-10
    with mpmath.workdps(40):
        zeta2 = mpmath.zeta(2)
        zeta_km1 = mpmath.zeta(K - 1) if K >= 4 else None
        s = 1 + mpmath.mpf(1) / K
        neg_dz = -mpmath.zeta(s, 1, 1)
        C = neg_dz / K ** 2
        C_log2 = neg_dz / (mpmath.ln2 * K ** 2)
    return ZetaConstants(
        K=K,
        zeta2=float(zeta2),
        zeta_k_minus_1=float(zeta_km1) if zeta_km1 is not None else None,
        neg_zeta_prime=float(neg_dz),
        C=float(C) + err,
        C_log2=float(C_log2) + err,
        err=err,
    )
