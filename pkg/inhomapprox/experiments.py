"""
Experiments
===========
End-to-end runs built on the kernels: Chung-Erdos lower bounds, finite-Q
coverage of the limsup set W(psi, gamma), the shrinking procedure for
monotone psi, the multiplicative pipeline, the k-dimensional experiment
and two arithmetic diagnostics.

Every report here is a finite proxy: unions over q <= Q and sliding
windows [Q, 2Q]. None of them computes |W(psi, gamma)|.

Usage:
    from inhomapprox.experiments import ExperimentConfig, union_coverage_scan

    cfg = ExperimentConfig(gamma='sqrt2', Q=256)
    report = union_coverage_scan(cfg)
    report.passed
"""
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Dict, List, Tuple

import numpy as np
from scipy.stats import binomtest

from . import arith
from .approxfun import (HALF_NUM, QUANT, QUANTIZATION_NOTE, ApproxFunction, FThresholdFilter, OmegaFilter,
                        _in_B, condition_D_scan, dyadic_checkpoints, restricted_sum)
from .arith import as_fraction
from .errors import BudgetExceeded, ConfigError, IndeterminateAtPrecision, NotMonotone, ZeroMass
from .intervals import FixedPointSum, UnionAccumulator, _certified_snapshot, pair_measure_exact
from .pool import ordered_map
from .realnum import Ball, Undecided, certify, coerce_real, parse_real, scaled_state, signed_numerator
from .reports import BoundsReport, format_value

logger = logging.getLogger(__name__)

PROXY_HEADER = ("finite proxies only: unions over q <= Q and windows [Q, 2Q]; "
                "|W(psi, gamma)| itself is never computed")
HEURISTIC_NOTE = "divergence verdicts are heuristic: ratios of dyadic increments of the partial sums"
SHRINK_START = 100
CONVERGENT_RATIO = 0.75
HIGHDIM_PAIR_BUDGET = 1000
CF_RATIO_LIMIT = 10 ** 6
MC_CONFIDENCE = 0.95
MC_TOLERANCE = 4


def _get_config():
    """Get the module config (avoids circular imports)."""
    from . import get_module_config
    return get_module_config()


# ─── Configuration and report ───

def _default_psi():
    return {'family': 'c_over_q', 'c': '1/2', 'q0': 2, 'filters': []}


def _psi_error_key(message):
    for word, key in (('>= 1/2', 'psi.c'), ('unknown family', 'psi.family'), ('q0', 'psi.q0'),
                      ('table', 'psi.table'), ('filter', 'psi.filters'), ('parameter', 'psi.filters')):
        if word in message:
            return key
    return 'psi.c'


@dataclass
class ExperimentConfig:
    """
    One experiment with every default materialized.

    psi is a config mapping (family, c, q0, filters, table) or an
    ApproxFunction; reals are preset names, 'p/q', decimals or 'a:err'.
    """

    gamma: str = 'sqrt2'
    gammas: Tuple[str, ...] = ()
    beta: str = 'sqrt2'
    gamma2: str = '0'
    psi: Any = field(default_factory=_default_psi)
    Q: int = 1024
    schedule: Tuple[int, ...] = ()
    H: int = 4
    k: int = 1
    seed: int = 0
    precision_digits: int = 64
    threads: int = 1
    out: str = 'reports'
    indeterminate_cap: int = 0
    N: int = 2000
    K: int = 2
    mc_points: int = 1_000_000
    epsilon: str = '0.1'
    _psi_function: Any = field(default=None, init=False, repr=False, compare=False)

    def validate(self):
        """Check every field; raises ConfigError naming the key."""
        positive = {'Q': self.Q, 'threads': self.threads, 'precision_digits': self.precision_digits,
                    'mc_points': self.mc_points, 'N': self.N}
        for key, value in positive.items():
            if not isinstance(value, int) or isinstance(value, bool) or value < 1:
                raise ConfigError(f"must be a positive integer, got {value!r}", key=key)
        if self.H <= 2:
            raise ConfigError(f"must be > 2, got {self.H}", key='H')
        if self.k not in (1, 2, 3):
            raise ConfigError(f"must be 1, 2 or 3, got {self.k}", key='k')
        if self.K < 2:
            raise ConfigError(f"must be >= 2, got {self.K}", key='K')
        if self.seed < 0 or self.seed >= 2 ** 64:
            raise ConfigError("must fit in an unsigned 64-bit integer", key='seed')
        if self.indeterminate_cap < 0:
            raise ConfigError("must be >= 0", key='indeterminate_cap')
        schedule = list(self.schedule)
        if schedule:
            if schedule[0] < 1 or any(b <= a for a, b in zip(schedule, schedule[1:])):
                raise ConfigError("must be strictly increasing positive integers", key='schedule')
            if schedule[-1] > self.Q:
                raise ConfigError(f"last checkpoint {schedule[-1]} exceeds Q={self.Q}", key='schedule')
        if self.gammas and len(self.gammas) != self.k:
            raise ConfigError(f"needs k={self.k} entries, got {len(self.gammas)}", key='gammas')
        for key in ('gamma', 'beta', 'gamma2'):
            try:
                parse_real(getattr(self, key))
            except ValueError as e:
                raise ConfigError(str(e), key=key) from e
        for i, text in enumerate(self.gammas):
            try:
                parse_real(text)
            except ValueError as e:
                raise ConfigError(str(e), key=f'gammas[{i}]') from e
        try:
            if as_fraction(self.epsilon) <= 0:
                raise ConfigError("must be positive", key='epsilon')
        except (ValueError, TypeError, ArithmeticError) as e:
            raise ConfigError(f"not a number: {self.epsilon!r}", key='epsilon') from e
        try:
            self.psi_function()
        except ValueError as e:
            raise ConfigError(str(e), key=_psi_error_key(str(e))) from e
        return self

    def psi_function(self):
        if self._psi_function is None:
            self._psi_function = (self.psi if isinstance(self.psi, ApproxFunction)
                                  else ApproxFunction.from_config(self.psi))
        return self._psi_function

    def psi_config(self):
        return self.psi.to_config() if isinstance(self.psi, ApproxFunction) else dict(self.psi)

    def gamma_real(self):
        return parse_real(self.gamma)

    def gamma_reals(self):
        """The k shifts: gammas if given, else gamma repeated."""
        return [parse_real(g) for g in self.gammas] if self.gammas else [parse_real(self.gamma)] * self.k

    def checkpoints(self):
        return list(self.schedule) if self.schedule else dyadic_checkpoints(self.Q)


@dataclass
class ExperimentReport(BoundsReport):
    """A BoundsReport carrying the finite-proxy header and free-form diagnostics."""

    header: str = PROXY_HEADER
    diagnostics: Dict[str, Any] = field(default_factory=dict)

    def to_dict(self):
        data = super().to_dict()
        data['header'] = self.header
        data['diagnostics'] = _jsonable(self.diagnostics)
        return data


def _jsonable(value):
    if isinstance(value, dict):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, str):
        return value
    return format_value(value)


# ─── Chung-Erdos ───

def ce_lower_bound(measures, intersections=None):
    """
    (sum_s m(E_s))^2 / sum_{s,t} m(E_s cap E_t), exactly.

    Diagonal terms of the denominator are m(E_s cap E_s) = m(E_s).

    Args:
        measures: m(E_s) per event, as a sequence or a mapping index -> measure.
        intersections: mapping {(s, t): m(E_s cap E_t)} over unordered pairs
            s != t; absent pairs are disjoint.

    Raises:
        ZeroMass: if every measure is zero.
    """
    items = measures.items() if isinstance(measures, dict) else enumerate(measures)
    m = {s: as_fraction(v) for s, v in items}
    if any(v < 0 for v in m.values()):
        raise ValueError("measures must be nonnegative")
    total = sum(m.values(), Fraction(0))
    if total == 0:
        raise ZeroMass("all measures vanish")

    pairs = {}
    for (s, t), value in (intersections or {}).items():
        if s == t:
            raise ValueError(f"diagonal entry ({s}, {t}); diagonal terms come from the measures")
        if s not in m or t not in m:
            raise ValueError(f"pair ({s}, {t}) names an unknown event")
        key = (s, t) if s < t else (t, s)
        if key in pairs:
            raise ValueError(f"pair {key} given twice")
        value = as_fraction(value)
        if not 0 <= value <= min(m[s], m[t]):
            raise ValueError(f"intersection {value} of ({s}, {t}) is not in [0, min(m_s, m_t)]")
        pairs[key] = value
    return total * total / (total + 2 * sum(pairs.values(), Fraction(0)))


def _ce_enclosure(total, pairs):
    """(lo, hi) of the Chung-Erdos ratio when the pair sum is only enclosed."""
    return (total * total / (total + 2 * pairs.hi),
            total * total / (total + 2 * pairs.lo))


def _enclosure_ball(lo, hi):
    return Ball((lo + hi) / 2, (hi - lo) / 2)


def _compare_below(lo, hi, bound):
    """True if hi <= bound, False if lo > bound, None in between."""
    if hi <= bound:
        return True
    if lo > bound:
        return False
    return None


# ─── One-dimensional coverage ───

def _widths(psi, q_max):
    return {q: psi(q) for q in range(1, q_max + 1)}


def _centers(gammas, widths):
    """gamma-hat per shift, certified against every A_q boundary."""
    checks = [(q, w) for q, w in widths.items() if w]
    return [Fraction(s.num, s.den) for s in (_certified_snapshot(g, checks) for g in gammas)]


def _pair_rows(support, widths, centers, threads, classes=None):
    """
    Per q in support: enclosure of sum_{q' < q} prod_i |A_q^(i) cap A_q'^(i)|,
    plus the same sum restricted to q' in q's class when classes is given.
    """
    def row(i):
        q = support[i]
        w = widths[q]
        total = FixedPointSum()
        same = FixedPointSum()
        for q2 in support[:i]:
            value = Fraction(1)
            for center in centers:
                value *= pair_measure_exact(q, q2, w, widths[q2], center)
                if not value:
                    break
            if value:
                total.add(value)
                if classes is not None and classes[q] == classes[q2]:
                    same.add(value)
        return total, same

    return ordered_map(row, range(len(support)), threads)


def _coverage(psi, gamma, checkpoints, threads, name):
    budget = _get_config().EXACT_Q_BUDGET
    Q_max = checkpoints[-1]
    window_tops = [2 * Q for Q in checkpoints if 2 * Q <= budget]
    widths = _widths(psi, max([Q_max] + window_tops))
    gamma = coerce_real(gamma)
    center, = _centers([gamma], widths)
    support = [q for q in range(1, Q_max + 1) if widths[q]]
    rows = _pair_rows(support, widths, [center], threads)
    row_of = {q: rows[i][0] for i, q in enumerate(support)}

    report = ExperimentReport(name, ['Q', 'sum_measure', 'pair_sum', 'ce_bound', 'union_measure',
                                     'window_measure', 'pass'])
    union = UnionAccumulator(psi, gamma)
    pairs = FixedPointSum()
    total = Fraction(0)
    previous = Fraction(0)
    marks = set(checkpoints)
    for q in range(1, Q_max + 1):
        union.add(q)
        total += 2 * widths[q]
        if q in row_of:
            pairs.merge(row_of[q])
        if q not in marks:
            continue
        measure = union.measure()
        monotone = measure >= previous
        previous = measure
        ce, verdict = None, None
        if total:
            lo, hi = _ce_enclosure(total, pairs)
            ce = _enclosure_ball(lo, hi)
            verdict = _compare_below(lo, hi, measure)
            if verdict is None:
                report.indeterminate += 1
        window = None
        if 2 * q <= budget:
            window = UnionAccumulator(psi, gamma).extend(range(q, 2 * q + 1)).measure()
        report.add(Q=q, sum_measure=total, pair_sum=_enclosure_ball(pairs.lo, pairs.hi), ce_bound=ce,
                   union_measure=measure, window_measure=window,
                   **{'pass': False if not monotone else verdict})
        logger.info("[Coverage] Q=%d union=%.6f", q, float(measure))

    report.fitted['terminal_union'] = previous
    report.fitted['Q_max'] = Q_max
    report.notes.append(QUANTIZATION_NOTE)
    report.notes.append(f"A_q endpoints perturbed by at most err(gamma)/q = {float(gamma.err):.3g}/q")
    if any(row['window_measure'] is None for row in report.rows):
        report.notes.append(f"windows [Q, 2Q] past the exact budget {budget} are not computed")
    return report


def union_coverage_scan(cfg):
    """
    Exact |union_{q<=Q} A_q|, the Chung-Erdos bound and sum 2 psi(q) at each
    checkpoint, plus the sliding window unions over [Q, 2Q].

    Raises:
        BudgetExceeded: if the last checkpoint exceeds EXACT_Q_BUDGET.
    """
    if cfg.k != 1:
        raise ValueError("union_coverage_scan is one-dimensional; use highdim_experiment for k >= 2")
    checkpoints = cfg.checkpoints()
    budget = _get_config().EXACT_Q_BUDGET
    if checkpoints[-1] > budget:
        raise BudgetExceeded(f"Q={checkpoints[-1]} exceeds the exact budget {budget}")
    return _coverage(cfg.psi_function(), cfg.gamma_real(), checkpoints, cfg.threads, 'coverage')


# ─── Shrinking ───

@dataclass(frozen=True)
class ShrinkEvent:
    """One shrink at s: psi' = 1/(2q) on [lo, s]; full windows start at ceil(s/2)."""

    s: int
    lo: int
    full: bool
    window_sum: Fraction

    @property
    def passed(self):
        return self.window_sum >= Fraction(1, 4) if self.full else None


@dataclass
class ShrinkResult:
    """psi' (an ApproxFunction), the shrink events and the report."""

    psi: ApproxFunction
    events: List[ShrinkEvent]
    report: ExperimentReport


def _check_monotone(psi, q_max):
    """Non-increasing from the first q with psi(q) > 0."""
    prev = None
    for q in range(1, q_max + 1):
        value = psi.num(q)
        if prev is None:
            if value:
                prev = value
            continue
        if value > prev:
            raise NotMonotone(f"psi({q}) > psi({q - 1})", q=q)
        prev = value


def _g_k_report(psi_prime, q_max, K, report):
    """Restrict to G_K = {F(q) <= 2 C K^2} and record its density statistics."""
    C = arith.zeta_constants(K).C_log2
    threshold = as_fraction(2 * C * K * K)
    keep = FThresholdFilter(threshold).mask(1, q_max)
    outside = np.concatenate(([0], np.cumsum(~keep)))
    qs = np.arange(1, q_max + 1)
    halves = (qs + 1) // 2
    window_counts = outside[qs] - outside[halves - 1]
    restricted = restricted_sum(psi_prime, lambda q: bool(keep[q - 1]), q_max)
    report.fitted['G_K_threshold'] = float(threshold)
    report.fitted['G_K_lower_density'] = restricted.lower_density
    report.fitted['G_K_complement_max_window'] = int(window_counts.max())
    report.fitted['G_K_restricted_sum'] = restricted.total
    return psi_prime.with_filters(FThresholdFilter(threshold))


def szusz_shrink(psi, q_max, restrict_K=None):
    """
    Shrink a non-increasing psi to psi' <= psi with psi'(q) = O(1/q).

    The first q >= 100 with psi(q) >= 1/q starts a shrink on [q/2, q];
    each later such q shrinks on [max(previous + 1, q/2), q]. On a shrink
    window psi'(q') = min(psi(q'), 1/(2q')); elsewhere psi' = psi. Full
    windows must sum to at least 1/4.

    Args:
        psi: ApproxFunction, non-increasing once positive.
        q_max: last q examined; psi' is tabulated on [1, q_max].
        restrict_K: if given, psi' is further restricted to G_K.

    Returns:
        ShrinkResult. With no shrink and no restriction, result.psi is psi.

    Raises:
        NotMonotone: at the first q with psi(q) > psi(q - 1).
    """
    if q_max < 1:
        raise ValueError("q_max must be >= 1")
    _check_monotone(psi, q_max)
    values = {q: psi.num(q) for q in range(1, q_max + 1)}
    events = []
    last = 0
    for s in range(SHRINK_START, q_max + 1):
        if values[s] * s < QUANT:
            continue
        lo = max(last + 1, (s + 1) // 2)
        for q2 in range(lo, s + 1):
            values[q2] = min(values[q2], QUANT // (2 * q2))
        full = lo == (s + 1) // 2
        events.append(ShrinkEvent(s, lo, full, Fraction(sum(values[q2] for q2 in range(lo, s + 1)), QUANT)))
        last = s

    report = ExperimentReport('szusz-shrink', ['s', 'window_lo', 'window_hi', 'full', 'window_sum', 'pass'])
    for e in events:
        report.add(s=e.s, window_lo=e.lo, window_hi=e.s, full=e.full, window_sum=e.window_sum,
                   **{'pass': e.passed})
    if events:
        psi_prime = ApproxFunction('table', table={q: Fraction(v, QUANT) for q, v in values.items() if v})
        report.notes.append(f"psi' is tabulated on [1, {q_max}] and vanishes beyond")
    else:
        psi_prime = psi
        report.notes.append(f"no shrink triggered: psi(q) < 1/q on [{SHRINK_START}, {q_max}]")
    report.fitted['events'] = len(events)
    report.fitted['psi_prime_sum'] = Fraction(sum(values.values()), QUANT)
    if restrict_K is not None:
        psi_prime = _g_k_report(psi_prime, q_max, restrict_K, report)
    logger.info("[Shrink] %d events up to %d", len(events), q_max)
    return ShrinkResult(psi_prime, events, report)


# ─── Multiplicative pipeline ───

def _quotient_num(n, beta, gamma2, q):
    """floor(psi(q) / ||q beta - gamma2|| * 2^96) at the current approximations."""
    num, den, _ = scaled_state(q, beta.snapshot(), minus=gamma2.snapshot())
    dist = abs(signed_numerator(num, den))
    return n * den // dist


def multiplicative_pipeline(psi, beta, gamma1, gamma2, Q, schedule=None, threads=None):
    """
    psi'(q) = psi(q)/||q beta - gamma2|| on B = {q: ||q beta - gamma2|| >= 1/log2 q},
    0 off B, then the one-dimensional coverage scan for psi' and gamma1.

    psi' values at or above 1/2 are capped just below it and counted.

    Raises:
        BudgetExceeded: if Q exceeds EXACT_Q_BUDGET.
    """
    budget = _get_config().EXACT_Q_BUDGET
    if Q > budget:
        raise BudgetExceeded(f"Q={Q} exceeds the exact budget {budget}")
    if Q < 16:
        raise ValueError(f"multiplicative_pipeline needs Q >= 16, got {Q}")
    beta, gamma1, gamma2 = coerce_real(beta), coerce_real(gamma1), coerce_real(gamma2)

    members, undecided, capped = [], [], 0
    table = {}
    for q in range(2, Q + 1):
        n = psi.num(q)
        if not n:
            continue
        try:
            member, _ = _in_B(beta, gamma2, q)
        except IndeterminateAtPrecision:
            undecided.append(q)
            continue
        if not member:
            continue
        members.append(q)
        value = _quotient_num(n, beta, gamma2, q)
        if value >= HALF_NUM:
            value = HALF_NUM - 1
            capped += 1
        table[q] = Fraction(value, QUANT)

    if not table:
        report = ExperimentReport('multiplicative', ['Q', 'sum_measure', 'ce_bound', 'union_measure',
                                                     'condition_d', 'pass'])
        report.notes.append("empty pipeline: psi' vanishes on [1, Q]")
        report.fitted['B_members'] = 0
        report.fitted['B_indeterminate'] = len(undecided)
        return report

    psi_prime = ApproxFunction('table', table=table)
    checkpoints = list(schedule) if schedule else dyadic_checkpoints(Q)
    report = _coverage(psi_prime, gamma1, checkpoints, threads, 'multiplicative')
    d_report = condition_D_scan(psi, beta, gamma2, Q)
    report.columns.insert(-1, 'condition_d')
    for row in report.rows:
        row['condition_d'] = d_report.condition_d.get(row['Q'])
    report.fitted['B_members'] = len(members)
    report.fitted['B_indeterminate'] = len(undecided)
    report.fitted['psi_prime_capped'] = capped
    report.fitted['psi_prime_sum'] = Fraction(sum(psi_prime.num(q) for q in table), QUANT)
    report.diagnostics['condition_d'] = dict(sorted(d_report.condition_d.items()))
    report.indeterminate += len(undecided) + len(d_report.indeterminate)
    return report


# ─── B_{k,l} counts ───

def _bkl_block(beta, gamma2, k, cells, allow_undecided):
    """Counts per cell l of q in [2^k, 2^(k+1)] with ||q beta - gamma2|| in [2^l/k, 2^(l+1)/k]."""
    def attempt(b, g):
        counts = {l: 0 for l in cells}
        undecided = {l: 0 for l in cells}
        for q in range(1 << k, (1 << (k + 1)) + 1):
            num, den, rad = scaled_state(q, b, minus=g)
            dist = abs(signed_numerator(num, den))
            lo, hi = (dist - rad) * k, (dist + rad) * k
            for l in cells:
                a, c = (1 << l) * den, (1 << (l + 1)) * den
                if lo >= a and hi <= c:
                    counts[l] += 1
                elif hi < a or lo > c:
                    continue
                elif allow_undecided:
                    undecided[l] += 1
                else:
                    raise Undecided
        return counts, undecided

    return certify(attempt, beta, gamma2)


def bkl_counts(beta, gamma2, k_max, k_min=1):
    """
    Exact #B_{k,l} against the lower bound 2^k 2^l / k over the cells
    2^(l+1) < k, and the fitted c = min count * k / (2^k 2^l).
    """
    if k_min < 1 or k_max < k_min:
        raise ValueError(f"need 1 <= k_min <= k_max, got {k_min}, {k_max}")
    beta, gamma2 = coerce_real(beta), coerce_real(gamma2)
    report = ExperimentReport('bkl', ['k', 'l', 'count', 'lower', 'ratio', 'indeterminate', 'pass'])
    for k in range(k_min, k_max + 1):
        cells = [l for l in range(k.bit_length()) if 1 << (l + 1) < k]
        if not cells:
            continue
        try:
            counts, undecided = _bkl_block(beta, gamma2, k, cells, False)
        except IndeterminateAtPrecision:
            counts, undecided = _bkl_block(beta, gamma2, k, cells, True)
        for l in cells:
            lower = Fraction((1 << k) * (1 << l), k)
            report.add(k=k, l=l, count=counts[l], lower=lower, ratio=counts[l] / lower,
                       indeterminate=undecided[l], **{'pass': counts[l] > 0})
            report.indeterminate += undecided[l]
    if report.rows:
        report.fitted['c'] = min(row['ratio'] for row in report.rows)
    return report


# ─── Higher dimensions ───

def _divergence_terms(psi, k, Q, epsilon):
    """Float terms of the divergence series for dimension k, and the weight class of each q."""
    values = psi.float_values(1, Q)
    if k >= 3:
        return values ** k, None
    table = arith.get_sieve(Q)
    qs = np.arange(1, Q + 1, dtype=np.int64)
    if k == 2:
        phi = table.phi[1:Q + 1]
        terms = (values * phi / qs) ** 2
        classes = np.frexp((qs // phi).astype(np.float64))[1] - 1
    else:
        d = table.d[1:Q + 1].astype(np.float64)
        terms = values / d ** (1 + float(epsilon))
        classes = np.frexp(d)[1] - 1
    return terms, classes


def divergence_diagnostic(psi, k, Q, epsilon=Fraction(1, 10)):
    """
    Partial sums of the k-dimensional divergence series at powers of two,
    with a heuristic verdict from the last three dyadic increments.

    k >= 3: sum psi^k; k = 2: sum (psi phi(q)/q)^2; k = 1: sum psi/d(q)^(1+eps).

    Returns:
        dict with partial_sums, ratios, verdict and, for k <= 2, the class
        sums a_l.
    """
    terms, classes = _divergence_terms(psi, k, Q, epsilon)
    prefix = np.cumsum(terms)
    points = [p for p in dyadic_checkpoints(Q) if p & (p - 1) == 0]
    partial = {p: float(prefix[p - 1]) for p in points}
    increments = [partial[b] - partial[a] for a, b in zip(points, points[1:])]
    ratios = [b / a if a > 0 else math.inf for a, b in zip(increments[-3:], increments[-2:])]
    if len(increments) < 3:
        verdict = 'insufficient range'
    elif all(r < CONVERGENT_RATIO for r in ratios):
        verdict = 'likely convergent'
    else:
        verdict = 'likely divergent'
    out = {'partial_sums': partial, 'ratios': ratios, 'verdict': verdict}
    if classes is not None:
        out['class_sums'] = {int(l): float(terms[classes == l].sum()) for l in np.unique(classes)}
    return out


def _mc_shard(seed, shard, size, k, psi_floats, centers, checkpoints):
    """Hit counts of union_{q<=Q} B_q at each checkpoint for one shard's points."""
    rng = np.random.Generator(np.random.Philox(key=np.array([seed, shard], dtype=np.uint64)))
    x = rng.random((size, k))
    shifts = np.array(centers, dtype=np.float64)
    covered = np.zeros(size, dtype=bool)
    hits = []
    marks = set(checkpoints)
    for q in range(1, checkpoints[-1] + 1):
        w = psi_floats[q - 1]
        if w > 0:
            y = q * x - shifts
            covered |= np.all(np.abs(y - np.rint(y)) < w, axis=1)
        if q in marks:
            hits.append(int(np.count_nonzero(covered)))
    return hits


def monte_carlo_union(psi, centers, checkpoints, points, seed, shards, threads=None):
    """
    Estimate |union_{q<=Q} B_q| at each checkpoint from `points` uniform
    samples split over Philox streams keyed by (seed, shard).

    Returns:
        list of (estimate, ci_low, ci_high) per checkpoint (Wilson, 95%).
    """
    k = len(centers)
    sizes = [points // shards + (1 if s < points % shards else 0) for s in range(shards)]
    psi_floats = np.array([float(psi(q)) for q in range(1, checkpoints[-1] + 1)])
    floats = [float(c) for c in centers]
    per_shard = ordered_map(lambda s: _mc_shard(seed, s, sizes[s], k, psi_floats, floats, checkpoints),
                            range(shards), threads)
    out = []
    for i in range(len(checkpoints)):
        hits = sum(h[i] for h in per_shard)
        ci = binomtest(hits, points).proportion_ci(confidence_level=MC_CONFIDENCE, method='wilson')
        out.append((hits / points, float(ci.low), float(ci.high)))
    return out


def highdim_experiment(cfg):
    """
    The k-dimensional experiment for k in {1, 2, 3}.

    Exact |B_q| = (2 psi(q))^k and pairwise |B_q cap B_q'| as products of
    one-dimensional pair measures feed the Chung-Erdos bound. The union is
    exact for k = 1 and a Monte Carlo estimate with a Wilson interval for
    k >= 2; the bound must not exceed the estimate plus four half-widths.
    For k <= 2 the divergence series is also split into weight classes
    (D_l by q/phi(q) for k = 2, d(q) classes for k = 1) with restricted
    Chung-Erdos bounds per class.

    Raises:
        BudgetExceeded: if Q exceeds 1000.
    """
    k = cfg.k
    if k not in (1, 2, 3):
        raise ValueError(f"k must be 1, 2 or 3, got {k}")
    checkpoints = cfg.checkpoints()
    Q = checkpoints[-1]
    if Q > HIGHDIM_PAIR_BUDGET:
        raise BudgetExceeded(f"Q={Q} exceeds the pairwise budget {HIGHDIM_PAIR_BUDGET}")
    psi = cfg.psi_function()
    gammas = cfg.gamma_reals()
    config = _get_config()

    widths = _widths(psi, Q)
    centers = _centers(gammas, widths)
    support = [q for q in range(1, Q + 1) if widths[q]]
    classes = None
    if k == 1:
        classes = {q: arith.divisor_class_index(q) for q in support}
    elif k == 2:
        classes = {q: arith.dl_index(q) for q in support}
    rows = _pair_rows(support, widths, centers, cfg.threads, classes)
    row_of = {q: rows[i] for i, q in enumerate(support)}

    mc = None
    if k >= 2:
        mc = monte_carlo_union(psi, centers, checkpoints, cfg.mc_points, cfg.seed,
                               config.MC_SHARDS, cfg.threads)
    union = UnionAccumulator(psi, gammas[0]) if k == 1 else None

    report = ExperimentReport('highdim', ['Q', 'sum_measure', 'pair_sum', 'ce_bound', 'union_measure',
                                          'mc_estimate', 'ci_half_width', 'pass'])
    pairs = FixedPointSum()
    total = Fraction(0)
    class_mass, class_pairs = {}, {}
    marks = {Q2: i for i, Q2 in enumerate(checkpoints)}
    for q in range(1, Q + 1):
        box = (2 * widths[q]) ** k
        total += box
        if union is not None:
            union.add(q)
        if q in row_of:
            pairs.merge(row_of[q][0])
            if classes is not None:
                l = classes[q]
                class_mass[l] = class_mass.get(l, Fraction(0)) + box
                class_pairs.setdefault(l, FixedPointSum()).merge(row_of[q][1])
        if q not in marks:
            continue
        ce, lo, hi = None, None, None
        if total:
            lo, hi = _ce_enclosure(total, pairs)
            ce = _enclosure_ball(lo, hi)
        row = {'Q': q, 'sum_measure': total, 'pair_sum': _enclosure_ball(pairs.lo, pairs.hi), 'ce_bound': ce}
        verdict = None
        if union is not None:
            row['union_measure'] = union.measure()
            if ce is not None:
                verdict = _compare_below(lo, hi, row['union_measure'])
        else:
            estimate, ci_low, ci_high = mc[marks[q]]
            half = max(estimate - ci_low, ci_high - estimate)
            row['mc_estimate'] = Ball(as_fraction(estimate), as_fraction(half))
            row['ci_half_width'] = half
            if ce is not None:
                verdict = _compare_below(lo, hi, as_fraction(estimate + MC_TOLERANCE * half))
        if ce is not None and verdict is None:
            report.indeterminate += 1
        row['pass'] = verdict
        report.rows.append(row)

    diagnostic = divergence_diagnostic(psi, k, Q, as_fraction(cfg.epsilon))
    report.diagnostics['divergence'] = diagnostic
    report.fitted['verdict'] = f"{diagnostic['verdict']} (heuristic)"
    if classes is not None:
        class_ce = {}
        for l, mass in sorted(class_mass.items()):
            if mass:
                class_ce[l] = _enclosure_ball(*_ce_enclosure(mass, class_pairs[l]))
        report.diagnostics['class_ce_bounds'] = class_ce
        report.diagnostics['class_mass'] = dict(sorted(class_mass.items()))
    report.notes.append(HEURISTIC_NOTE)
    report.notes.append(QUANTIZATION_NOTE)
    if k >= 2:
        report.notes.append(f"Monte Carlo: {cfg.mc_points} points, seed {cfg.seed}, "
                            f"{config.MC_SHARDS} Philox streams, Wilson {MC_CONFIDENCE:.0%} interval")
    return report


# ─── Arithmetic diagnostics ───

@dataclass(frozen=True)
class RatioFact:
    """
    Extremes over q <= Q of (sum_{r|q} 1/r) / (q/phi(q)) = sigma(q) phi(q)/q^2,
    and the fitted C = max(1/min, max).
    """

    Q: int
    min_ratio: Fraction
    argmin: int
    max_ratio: Fraction
    argmax: int
    C: Fraction

    def as_report(self):
        report = ExperimentReport('cf-ratio', ['Q', 'min_ratio', 'argmin', 'max_ratio', 'argmax', 'C'],
                                  header='exhaustive scan of q <= Q')
        report.add(Q=self.Q, min_ratio=self.min_ratio, argmin=self.argmin, max_ratio=self.max_ratio,
                   argmax=self.argmax, C=self.C)
        return report


def divisor_ratio(q):
    """(sum_{r|q} 1/r) / (q/phi(q)), exactly."""
    return Fraction(arith.divisor_sigma(q) * arith.euler_phi(q), q * q)


def _exact_extreme(candidates, pick):
    best_q = None
    best = None
    for i in candidates:
        q = int(i) + 1
        value = divisor_ratio(q)
        if best is None or pick(value, best):
            best, best_q = value, q
    return best, best_q


def cf_ratio_fact_check(Q):
    """
    min and max of sigma(q) phi(q)/q^2 over q <= Q.

    The scan is vectorized in floats; the extremes are then re-decided
    exactly among all candidates within 1e-12 of the float extreme.
    """
    if not 1 <= Q <= CF_RATIO_LIMIT:
        raise ValueError(f"cf_ratio_fact_check needs 1 <= Q <= {CF_RATIO_LIMIT}, got {Q}")
    table = arith.get_sieve(Q)
    sigma = np.zeros(Q + 1, dtype=np.int64)
    for r in range(1, Q + 1):
        sigma[r::r] += r
    qs = np.arange(1, Q + 1, dtype=np.float64)
    ratios = sigma[1:].astype(np.float64) * table.phi[1:Q + 1].astype(np.float64) / (qs * qs)
    lo_candidates = np.flatnonzero(ratios <= ratios.min() + 1e-12)
    hi_candidates = np.flatnonzero(ratios >= ratios.max() - 1e-12)
    min_ratio, argmin = _exact_extreme(lo_candidates, lambda a, b: a < b)
    max_ratio, argmax = _exact_extreme(hi_candidates, lambda a, b: a > b)
    return RatioFact(Q, min_ratio, argmin, max_ratio, argmax, max(1 / min_ratio, max_ratio))


def hardy_ramanujan_sieve(psi, Q, epsilon):
    """
    The mass removed by the Omega filter: q <= Q with
    Omega(q) > (log2 q)^(1/2 + epsilon).

    Returns:
        ExperimentReport with one row per dyadic block (2^j, 2^(j+1)]
        giving the removed count, removed mass and the ratio to the
        previous block's mass; fitted carries the totals and the largest
        ratio.
    """
    if Q < 2:
        raise ValueError(f"hardy_ramanujan_sieve needs Q >= 2, got {Q}")
    epsilon = as_fraction(epsilon)
    keep = OmegaFilter(epsilon).mask(1, Q)
    removed = np.flatnonzero(~keep) + 1
    blocks = {}
    for q in removed:
        q = int(q)
        j = (q - 1).bit_length() - 1
        count, mass = blocks.get(j, (0, 0))
        blocks[j] = (count + 1, mass + psi.num(q))

    report = ExperimentReport('hr-sieve', ['block_lo', 'block_hi', 'removed', 'mass', 'ratio'],
                              header=f"Omega(q) > (log2 q)^(1/2 + {epsilon}), q <= {Q}")
    previous = None
    ratios = []
    for j in range(max(blocks) + 1 if blocks else 0):
        count, mass = blocks.get(j, (0, 0))
        mass = Fraction(mass, QUANT)
        ratio = float(mass / previous) if previous else None
        if ratio is not None:
            ratios.append(ratio)
        report.add(block_lo=(1 << j) + 1, block_hi=min(Q, 1 << (j + 1)), removed=count, mass=mass, ratio=ratio)
        previous = mass
    report.fitted['removed_count'] = int(len(removed))
    report.fitted['removed_mass'] = Fraction(sum(m for _, m in blocks.values()), QUANT)
    report.fitted['max_ratio'] = max(ratios) if ratios else None
    return report
