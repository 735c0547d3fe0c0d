"""
Bounds Verifiers
================
Finite checks of the quantitative lemmas behind the inhomogeneous
Khintchine argument:

- the master intersection bound (two branches on Delta vs H * gcd),
- the empirical Harman constant C0,
- the counting sum S(q) and its (r, k) re-indexing,
- the counting-lemma ratio stream (tame and O(1/q) normalizations, and
  the wildly Liouville q-window),
- the (B1)/(B2) split of the wildly Liouville counting argument,
- the F(q)-moment and tail bounds.

Constants are never assumed. Where a lemma has an unnamed constant the
verifier reports the implied value.
"""
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import arith
from .approxfun import delta
from .arith import as_fraction
from .errors import IndeterminateAtPrecision
from .intervals import pairwise_intersection_measure
from .pool import ordered_map
from .realnum import coerce_real, signed_numerator
from .reports import BoundsReport

logger = logging.getLogger(__name__)

DEFAULT_KAPPA = Fraction(1, 3) - Fraction(1, 100)


def _get_config():
    """Get the module config (avoids circular imports)."""
    from . import get_module_config
    return get_module_config()


@dataclass
class BoundsConfig:
    """
    Inputs shared by the verifiers.

    C0, C_prime and C_double_prime are filled with fitted values by the
    scans; they are reported, never assumed.
    """

    psi: object
    gamma: object
    H: int = 4
    q_min: int = 1
    q_max: int = 100
    C0: Optional[Fraction] = None
    C_prime: Optional[float] = None
    C_double_prime: Optional[float] = None

    def __post_init__(self):
        if self.H <= 2:
            raise ValueError(f"H must be an integer > 2, got {self.H}")
        self.gamma = coerce_real(self.gamma)


# ─── Ball membership ───

def _chi_decide(snap, m, g, d):
    """
    chi_{B(0, d/g)}({gamma m / g}) on one snapshot.

    Returns True/False, or None when the error ball straddles the radius.
    """
    if 2 * d > g:
        return True
    D = snap.den * g
    ax = abs(signed_numerator(m * snap.num, D))
    rad = abs(m) * snap.err_units
    # |{gamma m/g}| < d/g  <=>  ax/den < d
    if (ax + rad) * d.denominator < d.numerator * snap.den:
        return True
    if (ax - rad) * d.denominator >= d.numerator * snap.den:
        return False
    return None


def chi_batch(gamma, terms):
    """
    Decide chi for many (m, g, Delta) triples, refining gamma for the
    undecided ones.

    Returns:
        list of True/False/None; None marks terms still undecided at the
        precision cap.
    """
    gamma = coerce_real(gamma)
    results = [None] * len(terms)
    pending = list(range(len(terms)))
    while pending:
        snap = gamma.snapshot()
        still = []
        for i in pending:
            m, g, d = terms[i]
            verdict = _chi_decide(snap, m, g, as_fraction(d))
            if verdict is None:
                still.append(i)
            else:
                results[i] = verdict
        pending = still
        if not pending:
            break
        try:
            gamma.refine()
        except IndeterminateAtPrecision:
            logger.warning("[Chi] %d memberships undecided at the precision cap", len(pending))
            break
    return results


def chi(gamma, m, g, d):
    return chi_batch(gamma, [(m, g, d)])[0]


# ─── Master lemma ───

@dataclass(frozen=True)
class MasterCheck:
    q: int
    q2: int
    gcd: int
    delta: Fraction
    branch: int
    lhs: Fraction
    rhs: Optional[Fraction]
    chi: Optional[bool]
    c0_implied: Optional[Fraction]
    passed: Optional[bool]

    @property
    def indeterminate(self):
        return self.branch == 1 and self.chi is None


def master_check(q, q2, cfg):
    """
    Check the master intersection bound for the pair q' = q2 < q.

    Branch 1 (Delta < H gcd): |A_q cap A_q'| <= 2(2H+1) min(psi/q, psi'/q') gcd chi,
    checked exactly. Branch 2: recorded as
    C0_implied = 2H (|A_q cap A_q'| / (4 psi psi') - 1), clipped at 0.
    """
    if not 1 <= q2 < q:
        raise ValueError(f"master_check needs 1 <= q' < q, got q={q}, q'={q2}")
    pm = pairwise_intersection_measure(q, q2, cfg.psi, cfg.gamma, cfg.H)
    w, w2 = as_fraction(cfg.psi(q)), as_fraction(cfg.psi(q2))
    H = cfg.H
    if pm.small_delta:
        membership = chi(cfg.gamma, q2 - q, pm.gcd, pm.delta)
        scale = 2 * (2 * H + 1) * min(w / q, w2 / q2) * pm.gcd
        if membership is None:
            # chi = 1 is the larger right-hand side; only a failure there is certain
            passed = False if pm.measure > scale else None
            rhs = scale
        else:
            rhs = scale if membership else Fraction(0)
            passed = pm.measure <= rhs
        return MasterCheck(q, q2, pm.gcd, pm.delta, 1, pm.measure, rhs, membership, None, passed)

    product = 4 * w * w2
    c0 = max(Fraction(0), 2 * H * (pm.measure / product - 1)) if product else None
    return MasterCheck(q, q2, pm.gcd, pm.delta, 2, pm.measure, None, None, c0, None)


def master_scan(cfg, threads=None):
    """master_check over every pair q_min <= q' < q <= q_max."""
    pairs = [(q, q2) for q in range(max(cfg.q_min, 2), cfg.q_max + 1)
             for q2 in range(max(cfg.q_min, 1), q)]
    checks = ordered_map(lambda p: master_check(p[0], p[1], cfg), pairs, threads)
    report = BoundsReport('master-check', ['pair', 'branch', 'lhs', 'rhs', 'ratio', 'c0_implied',
                                           'indeterminate_count', 'pass'])
    c0 = Fraction(0)
    for mc in checks:
        ratio = mc.lhs / mc.rhs if mc.rhs else None
        report.add(pair=f"{mc.q2}:{mc.q}", branch=mc.branch, lhs=mc.lhs, rhs=mc.rhs, ratio=ratio,
                   c0_implied=mc.c0_implied, indeterminate_count=int(mc.indeterminate), **{'pass': mc.passed})
        report.indeterminate += int(mc.indeterminate)
        if mc.c0_implied is not None:
            c0 = max(c0, mc.c0_implied)
    cfg.C0 = c0
    report.fitted['C0_implied'] = c0
    report.fitted['pairs'] = len(checks)
    return report


@dataclass(frozen=True)
class HarmanEstimate:
    """Empirical sup of ||A_q cap A_q'| - 4 psi psi'| / (gcd min(psi/q, psi'/q'))."""

    q_max: int
    c0: Fraction
    pair: Optional[Tuple[int, int]]
    pairs_examined: int
    running: Tuple[Fraction, ...]


def harman_c0_estimate(q_max, psi, gamma, threads=None):
    """
    Running supremum over pairs q' < q <= q_max with psi(q) psi(q') > 0.

    running[i] is the supremum over q <= i + 1, so it is nondecreasing.
    """
    gamma = coerce_real(gamma)

    def scan_q(q):
        w = as_fraction(psi(q))
        best, where, seen = Fraction(0), None, 0
        if w == 0:
            return best, where, seen
        for q2 in range(1, q):
            w2 = as_fraction(psi(q2))
            if w2 == 0:
                continue
            pm = pairwise_intersection_measure(q, q2, psi, gamma)
            ratio = abs(pm.measure - pm.product) / (pm.gcd * min(w / q, w2 / q2))
            seen += 1
            if ratio > best:
                best, where = ratio, (q2, q)
        return best, where, seen

    sup, pair, examined = Fraction(0), None, 0
    running = []
    for best, where, seen in ordered_map(scan_q, range(1, q_max + 1), threads):
        examined += seen
        if best > sup:
            sup, pair = best, where
        running.append(sup)
    return HarmanEstimate(q_max, sup, pair, examined, tuple(running))


# ─── Counting sums ───

@dataclass(frozen=True)
class CountingSum:
    """S(q) with indeterminate terms counted as 0 (total) and as 1 (upper)."""

    q: int
    total: Fraction
    upper: Fraction
    indeterminate: int


def _counting_terms(q, psi, gamma):
    """(q', gcd, chi) for 1 <= q' < q."""
    terms = []
    for q2 in range(1, q):
        g = math.gcd(q, q2)
        terms.append((q2 - q, g, delta(psi, q, q2)))
    verdicts = chi_batch(gamma, terms)
    return [(q2, terms[q2 - 1][1], verdicts[q2 - 1]) for q2 in range(1, q)]


def counting_sum(q, psi, gamma):
    """S(q) = sum_{q' < q} (psi(q)/q) gcd(q', q) chi_{B(0, Delta/gcd)}({gamma (q'-q)/gcd})."""
    if q < 1:
        raise ValueError("q must be >= 1")
    w = as_fraction(psi(q))
    if w == 0:
        return CountingSum(q, Fraction(0), Fraction(0), 0)
    hits = unknown = count = 0
    for _, g, verdict in _counting_terms(q, psi, coerce_real(gamma)):
        if verdict is None:
            unknown += g
            count += 1
        elif verdict:
            hits += g
    scale = w / q
    return CountingSum(q, scale * hits, scale * (hits + unknown), count)


@dataclass
class CellCount:
    """One (r, k) cell: the q' with gcd r and q'/q in [2^-k-1, 2^-k)."""

    r: int
    k: int
    size: int = 0
    count: int = 0
    indeterminate: int = 0


@dataclass
class CountingDecomposition:
    """S(q) re-indexed by divisor r and dyadic level k."""

    q: int
    psi_q: Fraction
    cells: Dict[Tuple[int, int], CellCount] = field(default_factory=dict)
    total: Fraction = Fraction(0)
    small_part: Fraction = Fraction(0)
    bound_I: float = 0.0
    part_k_small: Fraction = Fraction(0)
    part_k_large: Fraction = Fraction(0)
    bound_II: float = 0.0
    indeterminate: int = 0

    def interval_radius(self, r, k):
        """The radius of I_{k,r}; None where log2 log2 (q/2^(k+1)) <= 0."""
        x = self.q / 2 ** (k + 1)
        if x <= 2:
            return None
        ll = math.log2(math.log2(x))
        return 2 ** (k + 2) / (r * ll * ll) if ll > 0 else None

    @property
    def checks(self):
        return {
            'I': float(self.small_part) <= self.bound_I * (1 + 1e-12),
            'II': float(self.part_k_large) <= self.bound_II * (1 + 1e-12),
        }


def dyadic_level(q, q2):
    """The k >= 0 with q'/q in [2^(-k-1), 2^(-k)), for 1 <= q' < q."""
    return ((q - 1) // q2).bit_length() - 1


def counting_decomposition(q, psi, gamma):
    """
    S(q) as (psi(q)/q) sum_{r | q} r sum_k sum_{q' in D_{k,r}} chi.

    Also reports the q' <= sqrt(q) part against psi(q) d(q) q^(-1/2) and
    the 2^k > r^2 part against zeta(2) psi(q).
    """
    w = as_fraction(psi(q))
    dec = CountingDecomposition(q=q, psi_q=w)
    dec.bound_I = float(w) * arith.divisor_count(q) / math.sqrt(q)
    dec.bound_II = float(w) * math.pi ** 2 / 6
    if w == 0:
        return dec
    scale = w / q
    for q2, g, verdict in _counting_terms(q, psi, coerce_real(gamma)):
        k = dyadic_level(q, q2)
        cell = dec.cells.setdefault((g, k), CellCount(g, k))
        cell.size += 1
        if verdict is None:
            cell.indeterminate += 1
            dec.indeterminate += 1
            continue
        if not verdict:
            continue
        cell.count += 1
        contribution = scale * g
        dec.total += contribution
        if q2 * q2 <= q:
            dec.small_part += contribution
        if 2 ** k <= g * g:
            dec.part_k_small += contribution
        else:
            dec.part_k_large += contribution
    return dec


def _liouville_window(q, windows):
    return any(Q ** 7 <= q <= math.isqrt(Q ** sigma) for Q, sigma in windows)


def counting_lemma_ratio(q_range, psi, gamma, normalization='tame', liouville_windows=None, threads=None):
    """
    Per-q ratio S(q) / (psi(q) (F(q)/(log2 log2 q)^2 + 1)), or with
    normalization='linear' S(q) / (psi(q) (F(q) + 1)).

    Args:
        q_range: iterable of q >= 16 (others are skipped).
        liouville_windows: optional [(Q, sigma(Q))] for a wildly Liouville
            shift; only q in some [Q^7, Q^(sigma/2)] are then examined.

    Returns:
        BoundsReport whose fitted 'max_ratio' is the empirical C' + C'' scale.
    """
    if normalization not in ('tame', 'linear'):
        raise ValueError("normalization must be 'tame' or 'linear'")
    gamma = coerce_real(gamma)
    qs = [q for q in q_range if q >= 16 and as_fraction(psi(q)) > 0]
    report = BoundsReport('counting-lemma', ['q', 'S', 'S_upper', 'ratio', 'running_max', 'indeterminate'])
    if liouville_windows is not None:
        qs = [q for q in qs if _liouville_window(q, liouville_windows)]
        report.notes.append(f"wildly Liouville windows [Q^7, Q^(sigma/2)] for {list(liouville_windows)}")
        if not qs:
            report.notes.append("every window is empty at this scale; nothing to verify")
            return report

    def row(q):
        s = counting_sum(q, psi, gamma)
        value, _ = arith.F(q)
        if normalization == 'tame':
            ll = math.log2(math.log2(q))
            norm = float(as_fraction(psi(q))) * (float(value) / (ll * ll) + 1)
        else:
            norm = float(as_fraction(psi(q))) * (float(value) + 1)
        ratio = float(s.total) / norm if s.total else 0.0
        return s, ratio

    running = 0.0
    for s, ratio in ordered_map(row, qs, threads):
        running = max(running, ratio)
        report.add(q=s.q, S=s.total, S_upper=s.upper, ratio=ratio, running_max=running,
                   indeterminate=s.indeterminate)
        report.indeterminate += s.indeterminate
    report.fitted['max_ratio'] = running
    report.fitted['normalization'] = normalization
    return report


@dataclass
class WildCell:
    r: int
    k: int
    kind: str
    count: int
    contribution: Fraction
    b1_limit: Optional[int] = None
    b1_holds: Optional[bool] = None
    at_bound: Optional[Fraction] = None


@dataclass
class WildSplit:
    """Cells of the wildly Liouville counting sum, split into (B1) and (B2)."""

    q: int
    Q: int
    kappa: Fraction
    cells: List[WildCell] = field(default_factory=list)
    total_b1: Fraction = Fraction(0)
    total_b2: Fraction = Fraction(0)

    @property
    def b1_claims_hold(self):
        return all(c.b1_holds is not False for c in self.cells)


def wild_counting_split(q, Q, psi, gamma, kappa=DEFAULT_KAPPA, c_psi=1):
    """
    Split the cells 2^k <= min(q^kappa, r^2) into (B1): r > 2^(k+2) c_psi Q/(log2 log2 q)^2,
    and (B2) otherwise.

    For (B1) cells the count is checked against floor((q/r)/Q); for (B2)
    cells the lower bound q/(2^k r) is reported.
    """
    kappa, c_psi = as_fraction(kappa), as_fraction(c_psi)
    if not 0 < kappa < Fraction(1, 3):
        raise ValueError("kappa must lie in (0, 1/3)")
    if q < 16:
        raise ValueError("wild_counting_split needs q >= 16")
    dec = counting_decomposition(q, psi, gamma)
    ll = math.log2(math.log2(q))
    cap = q ** float(kappa)
    split = WildSplit(q=q, Q=Q, kappa=kappa)
    scale = dec.psi_q / q
    for (r, k), cell in sorted(dec.cells.items()):
        if 2 ** k > cap or 2 ** k > r * r:
            continue
        contribution = scale * r * cell.count
        if r > 2 ** (k + 2) * float(c_psi) * Q / (ll * ll):
            limit = (q // r) // Q
            wc = WildCell(r, k, 'B1', cell.count, contribution, b1_limit=limit,
                          b1_holds=cell.count <= limit)
            split.total_b1 += contribution
        else:
            wc = WildCell(r, k, 'B2', cell.count, contribution, at_bound=Fraction(q, 2 ** k * r))
            split.total_b2 += contribution
        split.cells.append(wc)
    return split


# ─── F moments ───

@dataclass(frozen=True)
class FMomentCheck:
    Q: int
    K: int
    K_Q: int
    moment_sum: float
    moment_bound: float
    threshold: float
    tail_count: int
    tail_indeterminate: int
    tail_bound: float
    markov_bound: float
    passed: bool


def f_moment_tail_check(Q, K):
    """
    sum_{q<=Q} F(q)^K <= Q (C K^2)^K and #{q <= Q: F(q) > 2 C K^2} <= Q / 2^K,
    with C for base-2 logarithms from zeta_constants(K).

    Also checks the Markov step tail <= sum F^K / (2 C K^2)^K.
    """
    if K < 2:
        raise ValueError(f"K must be >= 2, got {K}")
    if not 16 <= Q <= _get_config().SIEVE_LIMIT:
        raise ValueError(f"Q must lie in [16, sieve limit], got {Q}")
    consts = arith.zeta_constants(K)
    values, errs = arith.f_table(Q)
    upper = (values[1:Q + 1] + errs[1:Q + 1]).astype(np.longdouble)
    lower = np.maximum(values[1:Q + 1] - errs[1:Q + 1], 0)
    moment_upper = float(np.sum(upper ** K))
    moment_lower = float(np.sum(lower ** K))
    bound = Q * (consts.C_log2 * K * K) ** K
    threshold = 2 * consts.C_log2 * K * K
    tail = arith.f_tail_count(Q, threshold)
    tail_bound = Q / 2 ** K
    markov = moment_lower / threshold ** K
    passed = (moment_upper <= bound
              and tail.count + tail.indeterminate <= tail_bound
              and tail.count <= markov)
    K_Q = round(2 * math.log2(math.log2(Q)))
    logger.info("[Moments] Q=%d K=%d sum=%.6g bound=%.6g tail=%d", Q, K, moment_upper, bound, tail.count)
    return FMomentCheck(Q=Q, K=K, K_Q=K_Q, moment_sum=moment_upper, moment_bound=bound, threshold=threshold,
                        tail_count=tail.count, tail_indeterminate=tail.indeterminate, tail_bound=tail_bound,
                        markov_bound=markov, passed=passed)
