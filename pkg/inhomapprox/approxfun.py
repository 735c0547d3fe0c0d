"""
Approximation Functions
=======================
psi as a composable description: a family formula, a positive constant c,
a start q0 and an ordered list of support filters. Values are quantized to
numerators over 2^96, rounded toward zero, so every set built from psi has
exact rational endpoints.

Also here: Delta(q, q'), dyadic partial sums, the weak-extra-divergence
window scan, the condition (D) series and restricted sums with a lower
density estimate.

Usage:
    from inhomapprox.approxfun import ApproxFunction, parse_filter

    psi = ApproxFunction('c_over_q_loglog2', c=1, filters=[parse_filter('omega(0.1)')])
    psi(16)            # Fraction(1, 64)
    psi.delta(3, 6)
"""
import logging
import math
import re
import threading
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, List, Optional, Tuple

import mpmath
import numpy as np

from . import arith
from .arith import as_fraction
from .errors import BudgetExceeded, IndeterminateAtPrecision
from .realnum import Undecided, certify, coerce_real, scaled_state, signed_numerator

logger = logging.getLogger(__name__)

QUANT_BITS = 96
QUANT = 1 << QUANT_BITS
HALF_NUM = QUANT // 2
QUANTIZATION_NOTE = "psi quantized to 2^-96, rounded toward zero"

FAMILIES = (
    'c_over_q',
    'c_over_q_loglog2',
    'c_over_q_log_loglog2',
    'c_over_q_log',
    'zero_below',
    'table',
)
# psi vanishes at q <= guard: log2 log2 q <= 1 for the loglog families, log2 q <= 1 for c_over_q_log
LOG_GUARD = 4
SINGLE_LOG_GUARD = 2
CHUNK = 1 << 22


def _get_config():
    """Get the module config (avoids circular imports)."""
    from . import get_module_config
    return get_module_config()


# ─── Filters ───

@dataclass(frozen=True)
class OmegaFilter:
    """Keep q with Omega(q) <= (log2 q)^(1/2 + epsilon)."""

    epsilon: Fraction

    @property
    def spec(self):
        return f"omega({self.epsilon})"

    def __call__(self, q):
        return arith.omega_support_filter(q, self.epsilon)

    def mask(self, lo, hi):
        omega = arith.get_sieve(hi).omega[lo:hi + 1].astype(np.float64)
        qs = np.arange(lo, hi + 1, dtype=np.float64)
        with np.errstate(divide='ignore', invalid='ignore'):
            bound = np.power(np.log2(qs), 0.5 + float(self.epsilon))
        keep = omega <= bound
        keep[qs < 3] = True
        close = np.flatnonzero((np.abs(omega - bound) < 1e-9) & (qs >= 3))
        for i in close:
            keep[i] = self(lo + int(i))
        return keep


@dataclass(frozen=True)
class FThresholdFilter:
    """Keep q with F(q) <= threshold; entries inside the error margin are kept."""

    threshold: Fraction

    @property
    def spec(self):
        return f"F<={self.threshold}"

    def __call__(self, q):
        value, err = arith.F(q)
        return arith.compare_with_margin(value, err, mpmath.mpf(self.threshold.numerator) / self.threshold.denominator) != 1

    def mask(self, lo, hi):
        values, errs = arith.f_table(hi)
        t = float(self.threshold)
        return ~((values[lo:hi + 1] - errs[lo:hi + 1]) > t)


@dataclass(frozen=True)
class SetFilter:
    """Keep q in an explicit finite set."""

    members: frozenset

    @property
    def spec(self):
        return f"set({','.join(str(m) for m in sorted(self.members))})"

    def __call__(self, q):
        return q in self.members

    def mask(self, lo, hi):
        keep = np.zeros(hi - lo + 1, dtype=bool)
        idx = np.array([m - lo for m in self.members if lo <= m <= hi], dtype=np.intp)
        keep[idx] = True
        return keep


@dataclass(frozen=True)
class MultiplesFilter:
    """Keep multiples of M."""

    M: int

    @property
    def spec(self):
        return f"multiples({self.M})"

    def __call__(self, q):
        return q % self.M == 0

    def mask(self, lo, hi):
        return np.arange(lo, hi + 1) % self.M == 0


@dataclass(frozen=True)
class DlFilter:
    """Keep q in the weight class D_l: q/phi(q) in [2^l, 2^(l+1))."""

    l: int

    @property
    def spec(self):
        return f"dl({self.l})"

    def __call__(self, q):
        return arith.dl_index(q) == self.l

    def mask(self, lo, hi):
        qs = np.arange(lo, hi + 1, dtype=np.int64)
        ratio = qs // arith.get_sieve(hi).phi[lo:hi + 1]
        return np.frexp(ratio.astype(np.float64))[1] - 1 == self.l


_FILTER_PATTERNS = (
    (re.compile(r'^omega\(\s*([^)]+?)\s*\)$'), lambda m: OmegaFilter(_positive(m.group(1), 'omega'))),
    (re.compile(r'^F\s*<=\s*(.+)$'), lambda m: FThresholdFilter(_positive(m.group(1), 'F<='))),
    (re.compile(r'^set\(([^)]*)\)$'),
     lambda m: SetFilter(frozenset(int(x) for x in m.group(1).split(',') if x.strip()))),
    (re.compile(r'^multiples\(\s*(\d+)\s*\)$'), lambda m: MultiplesFilter(_positive_int(m.group(1), 'multiples'))),
    (re.compile(r'^dl\(\s*(\d+)\s*\)$'), lambda m: DlFilter(int(m.group(1)))),
)


def _positive(text, what):
    value = as_fraction(text)
    if value <= 0:
        raise ValueError(f"{what} parameter must be positive, got {text}")
    return value


def _positive_int(text, what):
    value = int(text)
    if value < 1:
        raise ValueError(f"{what} parameter must be a positive integer, got {text}")
    return value


def parse_filter(text):
    """Parse 'omega(0.1)', 'F<=4.0', 'set(1,2,3)', 'multiples(5)' or 'dl(1)'."""
    text = text.strip()
    for pattern, build in _FILTER_PATTERNS:
        m = pattern.match(text)
        if m:
            return build(m)
    raise ValueError(f"unknown filter {text!r}")


# ─── The function itself ───

def _floor_quant(value):
    """floor(value * 2^96) for a nonnegative Fraction."""
    return (value.numerator * QUANT) // value.denominator


def _exact_log2(n):
    """log2(n) as an int if n is a power of two, else None."""
    return n.bit_length() - 1 if n > 0 and n & (n - 1) == 0 else None


class ApproxFunction:
    """
    A quantized approximation function.

    Immutable once built; the value cache is filled under a lock and never
    changes what a value is.
    """

    def __init__(self, family, c=1, q0=1, filters=(), table=None):
        if family not in FAMILIES:
            raise ValueError(f"unknown family {family!r}; choose one of {', '.join(FAMILIES)}")
        self.family = family
        self.c = as_fraction(c)
        if self.c <= 0 and family != 'table':
            raise ValueError(f"c must be positive, got {c}")
        self.q0 = int(q0)
        if self.q0 < 1:
            raise ValueError("q0 must be >= 1")
        self.filters = tuple(parse_filter(f) if isinstance(f, str) else f for f in filters)
        self.table = {}
        if family == 'table':
            if not table:
                raise ValueError("the table family needs a nonempty table")
            self.table = {int(q): _floor_quant(as_fraction(v)) for q, v in table.items()}
            if any(v < 0 for v in self.table.values()):
                raise ValueError("table values must be nonnegative")
        self._cache = {}
        self._lock = threading.Lock()
        self._key = None
        self._validate()

    def _validate(self):
        if self.family == 'table':
            bad = [q for q, v in self.table.items() if v >= HALF_NUM]
        else:
            bad = [q for q in range(self.q0, self.q0 + 65) if self._family_num(q) >= HALF_NUM]
        if bad:
            raise ValueError(f"psi({bad[0]}) >= 1/2 for family {self.family} with c={self.c}, q0={self.q0}")

    # ─── Identity ───

    @property
    def key(self):
        """Stable text identity, used in cache keys and reports."""
        if self._key is not None:
            return self._key
        parts = [f"{self.family}(c={self.c},q0={self.q0})"]
        if self.family == 'table':
            parts.append('table{' + ','.join(f"{q}:{v}" for q, v in sorted(self.table.items())) + '}')
        parts.extend(f.spec for f in self.filters)
        self._key = '|'.join(parts)
        return self._key

    def __eq__(self, other):
        return isinstance(other, ApproxFunction) and self.key == other.key

    def __hash__(self):
        return hash(self.key)

    def __repr__(self):
        return f"ApproxFunction({self.key})"

    def with_filters(self, *filters):
        """A new function with extra filters appended."""
        table = {q: Fraction(v, QUANT) for q, v in self.table.items()} or None
        return ApproxFunction(self.family, self.c, self.q0, self.filters + tuple(filters), table)

    @classmethod
    def from_config(cls, data):
        """Build from a config mapping: family, c, q0, filters, table."""
        return cls(
            family=data.get('family', 'c_over_q'),
            c=data.get('c', 1),
            q0=data.get('q0', 1),
            filters=data.get('filters', ()),
            table=data.get('table'),
        )

    def to_config(self):
        data = {'family': self.family, 'c': str(self.c), 'q0': self.q0,
                'filters': [f.spec for f in self.filters]}
        if self.table:
            data['table'] = {str(q): str(Fraction(v, QUANT)) for q, v in sorted(self.table.items())}
        return data

    # ─── Values ───

    def _family_num(self, q):
        """Quantized numerator of the unfiltered family value."""
        if q < self.q0:
            return 0
        family, c = self.family, self.c
        if family == 'table':
            return self.table.get(q, 0)
        if family == 'zero_below':
            return _floor_quant(c)
        if family == 'c_over_q':
            return _floor_quant(c / q)
        if q <= (SINGLE_LOG_GUARD if family == 'c_over_q_log' else LOG_GUARD):
            return 0

        log_q = _exact_log2(q)
        loglog = _exact_log2(log_q) if log_q is not None else None
        if family == 'c_over_q_log' and log_q is not None:
            return _floor_quant(c / (q * log_q))
        if loglog is not None:
            factor = loglog * loglog if family == 'c_over_q_loglog2' else log_q * loglog * loglog
            return _floor_quant(c / (q * factor))

        with mpmath.workdps(60):
            l1 = mpmath.log(q, 2)
            if family == 'c_over_q_log':
                denom = q * l1
            else:
                l2 = mpmath.log(l1, 2)
                denom = q * l2 * l2 if family == 'c_over_q_loglog2' else q * l1 * l2 * l2
            value = mpmath.mpf(c.numerator) * QUANT / (c.denominator * denom)
            return int(mpmath.floor(value))

    def passes(self, q):
        return all(f(q) for f in self.filters)

    def num(self, q):
        """psi(q) * 2^96 as an int."""
        if q < 1:
            raise ValueError(f"psi is defined for q >= 1, got {q}")
        cached = self._cache.get(q)
        if cached is not None:
            return cached
        value = self._family_num(q)
        if value and not self.passes(q):
            value = 0
        with self._lock:
            self._cache[q] = value
        return value

    def eval(self, q):
        """psi(q) as an exact dyadic Fraction in [0, 1/2)."""
        return Fraction(self.num(q), QUANT)

    __call__ = eval

    def delta(self, q, q2):
        """Delta(q, q') = q psi(q') + q' psi(q), exact."""
        return Fraction(q * self.num(q2) + q2 * self.num(q), QUANT)

    # ─── Vectorized views ───

    def _family_floats(self, qs):
        q = qs.astype(np.float64)
        c = float(self.c)
        if self.family == 'table':
            values = np.zeros(len(qs))
            lo = int(qs[0])
            for k, v in self.table.items():
                if lo <= k <= int(qs[-1]):
                    values[k - lo] = v / QUANT
        elif self.family == 'zero_below':
            values = np.full(len(qs), c)
        elif self.family == 'c_over_q':
            values = c / q
        else:
            with np.errstate(divide='ignore', invalid='ignore'):
                l1 = np.log2(q)
                l2 = np.log2(l1)
                if self.family == 'c_over_q_log':
                    values = c / (q * l1)
                elif self.family == 'c_over_q_loglog2':
                    values = c / (q * l2 * l2)
                else:
                    values = c / (q * l1 * l2 * l2)
            guard = SINGLE_LOG_GUARD if self.family == 'c_over_q_log' else LOG_GUARD
            values[qs <= guard] = 0.0
        values[qs < self.q0] = 0.0
        return values

    def support_mask(self, lo, hi):
        """Boolean array over lo..hi of where the filters pass."""
        keep = np.ones(hi - lo + 1, dtype=bool)
        for f in self.filters:
            keep &= f.mask(lo, hi)
        return keep & (self._family_floats(np.arange(lo, hi + 1)) > 0)

    def float_values(self, lo, hi):
        """float64 values of psi over lo..hi (filters applied as masks)."""
        if lo < 1 or hi < lo:
            raise ValueError(f"bad range [{lo}, {hi}]")
        values = self._family_floats(np.arange(lo, hi + 1))
        for f in self.filters:
            values[~f.mask(lo, hi)] = 0.0
        return values


def eval_psi(psi, q):
    return psi.eval(q)


def delta(psi, q, q2):
    """Delta(q, q') for an ApproxFunction or any callable returning Fractions."""
    if isinstance(psi, ApproxFunction):
        return psi.delta(q, q2)
    return q * as_fraction(psi(q2)) + q2 * as_fraction(psi(q))


# ─── Divergence diagnostics ───

@dataclass(frozen=True)
class WexWindow:
    Q: int
    upper: int
    window_sum: float
    capped: bool


@dataclass
class DivergenceReport:
    """Partial sums and window diagnostics for one psi."""

    partial_sums: Dict[int, object] = field(default_factory=dict)
    wex_windows: List[WexWindow] = field(default_factory=list)
    condition_d: Dict[int, float] = field(default_factory=dict)
    indeterminate: List[int] = field(default_factory=list)
    restricted: Optional['RestrictedSum'] = None
    quantization: str = QUANTIZATION_NOTE

    @property
    def window_capped(self):
        return any(w.capped for w in self.wex_windows)


def dyadic_checkpoints(Q, start=1):
    """Powers of two in [start, Q], plus Q itself."""
    points = []
    p = 1
    while p <= Q:
        if p >= start:
            points.append(p)
        p *= 2
    if not points or points[-1] != Q:
        points.append(Q)
    return points


def partial_sums(psi, Q):
    """Exact sum_{q<=Q} psi(q) at dyadic checkpoints."""
    checkpoints = set(dyadic_checkpoints(Q))
    report = DivergenceReport()
    total = 0
    for q in range(1, Q + 1):
        total += psi.num(q)
        if q in checkpoints:
            report.partial_sums[q] = Fraction(total, QUANT)
    return report


def _window_upper(Q, upper_exponent):
    cap_log2 = _get_config().WEX_CAP_LOG2
    if upper_exponent is None:
        exponent = math.log2(Q) ** 0.125
    else:
        exponent = float(upper_exponent(Q))
    upper_log2 = math.log2(Q) * exponent
    if upper_log2 > cap_log2:
        return 1 << cap_log2, True
    return max(Q, int(2.0 ** upper_log2)), False


def window_sum(psi, lo, hi):
    """Float sum of psi over [lo, hi] in vectorized chunks."""
    partials = []
    for start in range(lo, hi + 1, CHUNK):
        stop = min(hi, start + CHUNK - 1)
        partials.append(float(psi.float_values(start, stop).sum()))
    return math.fsum(partials)


def wex_scan(psi, Q_list, upper_exponent: Optional[Callable[[int], float]] = None):
    """
    Window sums sum_{q=Q}^{Q^((log2 Q)^(1/8))} psi(q).

    Args:
        psi: ApproxFunction.
        Q_list: window starts, each >= 16.
        upper_exponent: optional Q -> exponent replacing (log2 Q)^(1/8).

    Raises:
        BudgetExceeded: if a window has more terms than WEX_TERM_BUDGET.
    """
    budget = _get_config().WEX_TERM_BUDGET
    report = DivergenceReport()
    for Q in Q_list:
        if Q < 16:
            raise ValueError(f"wex_scan needs Q >= 16, got {Q}")
        upper, capped = _window_upper(Q, upper_exponent)
        terms = upper - Q + 1
        if terms > budget:
            raise BudgetExceeded(f"window [{Q}, {upper}] has {terms} terms, budget is {budget}")
        if capped:
            logger.warning("[WEx] window for Q=%d capped at 2^%d", Q, _get_config().WEX_CAP_LOG2)
        total = window_sum(psi, Q, upper)
        report.wex_windows.append(WexWindow(Q, upper, total, capped))
        logger.info("[WEx] Q=%d upper=%d sum=%.6g", Q, upper, total)
    return report


def _in_B(beta, gamma2, q):
    """Certified ||q beta - gamma2|| >= 1/log2 q; returns (member, distance)."""
    threshold = 1.0 / math.log2(q)

    def attempt(b, g):
        num, den, rad = scaled_state(q, b, minus=g)
        dist = abs(signed_numerator(num, den))
        d_float = dist / den
        if rad == 0 and _exact_log2(q) is not None:
            # 1/log2 q is rational here
            return dist * _exact_log2(q) >= den, d_float
        margin = rad / den
        if d_float - margin > threshold + 1e-12:
            return True, d_float
        if d_float + margin < threshold - 1e-12:
            return False, d_float
        with mpmath.workdps(60):
            t = 1 / mpmath.log(q, 2)
            lo = mpmath.mpf(dist - rad) / den
            hi = mpmath.mpf(dist + rad) / den
            slack = mpmath.mpf(10) ** -50
            if lo >= t + slack:
                return True, d_float
            if hi < t - slack:
                return False, d_float
        raise Undecided

    return certify(attempt, beta, gamma2)


def condition_D_scan(psi, beta, gamma2, Q):
    """
    Partial sums of sum over q in B of psi(q)/||q beta - gamma2||, with
    B = {q: ||q beta - gamma2|| >= 1/log2 q} certified per q.

    q = 1 is excluded (log2 1 = 0); entries undecidable at the precision
    cap go to report.indeterminate.
    """
    if Q < 16:
        raise ValueError(f"condition_D_scan needs Q >= 16, got {Q}")
    beta, gamma2 = coerce_real(beta), coerce_real(gamma2)
    checkpoints = set(dyadic_checkpoints(Q))
    report = DivergenceReport()
    total = 0.0
    for q in range(2, Q + 1):
        value = psi.num(q)
        if value:
            try:
                member, dist = _in_B(beta, gamma2, q)
            except IndeterminateAtPrecision:
                report.indeterminate.append(q)
                member = False
            if member:
                total += (value / QUANT) / dist
        if q in checkpoints:
            report.condition_d[q] = total
    if report.indeterminate:
        logger.warning("[D] %d indeterminate memberships", len(report.indeterminate))
    return report


@dataclass(frozen=True)
class RestrictedSum:
    """sum over A of a_q, with the lower density of A at dyadic checkpoints."""

    Q: int
    total: object
    count: int
    lower_density: float
    densities: Tuple[Tuple[int, float], ...]


def restricted_sum(weights, A, Q, min_checkpoint=16):
    """
    Sum a_q over q in A, q <= Q, and estimate the lower density of A.

    Args:
        weights: ApproxFunction (summed exactly) or callable q -> number.
        A: predicate q -> bool, or a container of integers.
        Q: upper limit.
        min_checkpoint: smallest dyadic checkpoint in the density minimum.

    Returns:
        RestrictedSum; the density is min over checkpoints Q' of
        #(A cap [1, Q'])/Q'.
    """
    if Q < 1:
        raise ValueError("Q must be >= 1")
    member = A if callable(A) else (lambda q: q in A)
    exact = isinstance(weights, ApproxFunction)
    checkpoints = dyadic_checkpoints(Q, start=min(min_checkpoint, Q))
    marks = set(checkpoints)
    total = 0
    floats = []
    count = 0
    densities = []
    for q in range(1, Q + 1):
        if member(q):
            count += 1
            if exact:
                total += weights.num(q)
            else:
                floats.append(float(weights(q)))
        if q in marks:
            densities.append((q, count / q))
    total = Fraction(total, QUANT) if exact else math.fsum(floats)
    return RestrictedSum(Q=Q, total=total, count=count,
                         lower_density=min(d for _, d in densities), densities=tuple(densities))
