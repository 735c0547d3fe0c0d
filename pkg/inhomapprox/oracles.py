"""
Oracle Runner
=============
Computes the regression values the test suite compares against and
freezes them into data/oracles.json.

Each entry records its parameters next to its value, so a test can
recompute exactly the same quantity. Values are exact fraction strings
where the quantity is exact.

Usage:
    Standalone:
        python scripts/freeze_oracles.py [--scale acceptance]

    From code:
        from inhomapprox.oracles import OracleRunner
        OracleRunner(path='data/oracles.json').run()
"""
import hashlib
import json
import logging
import os
import time
from datetime import datetime

from . import __version__
from .approxfun import ApproxFunction
from .bounds import counting_lemma_ratio, harman_c0_estimate
from .experiments import (ExperimentConfig, ExperimentReport, bkl_counts, cf_ratio_fact_check, hardy_ramanujan_sieve,
                          union_coverage_scan)
from .realnum import preset, reset_presets
from .reports import format_value
from .rotation import verify_72_bound
from .storage import write_json

logger = logging.getLogger(__name__)

# (desk, acceptance) parameters per oracle
SCALES = {
    'desk': {'coverage_Q': 256, 'harman_q': 60, 'counting_q': 256, 'bkl_k': 13,
             'sieve_Q': 100_000, 'ratio_Q': 100_000, 'discrepancy_N': 500},
    'acceptance': {'coverage_Q': 10_000, 'harman_q': 500, 'counting_q': 10_000, 'bkl_k': 13,
                   'sieve_Q': 1_000_000, 'ratio_Q': 100_000, 'discrepancy_N': 2000},
}


def half_over_q():
    """psi(q) = 1/(2q) for q >= 2."""
    return ApproxFunction('c_over_q', c='1/2', q0=2)


def load_oracles(path=os.path.join('data', 'oracles.json')):
    """The frozen oracle document, or None if it has not been written."""
    if not os.path.exists(path):
        return None
    with open(path, encoding='utf-8') as fh:
        return json.load(fh)


def discrepancy_digest(N, H=50):
    """sha256 of the golden-ratio discrepancy table for 1 <= n <= N."""
    report = verify_72_bound(preset('golden'), range(1, N + 1), N, sigma_mode='N', H=H)
    payload = '\n'.join(','.join(row) for row in report.table())
    return hashlib.sha256(payload.encode('utf-8')).hexdigest()


class OracleRunner:
    """
    Runs every oracle computation in sequence and writes one JSON document.
    """

    def __init__(self, path=os.path.join('data', 'oracles.json'), scale='desk'):
        if scale not in SCALES:
            raise ValueError(f"scale must be one of {', '.join(SCALES)}")
        self.path = path
        self.scale = scale
        self.params = SCALES[scale]
        self.entries = {}

    def _record(self, name, params, value):
        self.entries[name] = {'params': params, 'value': value}
        print(f"  {name}: {value if not isinstance(value, (list, dict)) else '...'}")

    def coverage(self):
        Q = self.params['coverage_Q']
        report = union_coverage_scan(ExperimentConfig(gamma='sqrt2', psi=half_over_q(), Q=Q))
        self._record('coverage_terminal_union', {'gamma': 'sqrt2', 'psi': 'c_over_q:1/2:2', 'Q': Q},
                     format_value(report.fitted['terminal_union']))

    def harman(self):
        q_max = self.params['harman_q']
        est = harman_c0_estimate(q_max, half_over_q(), preset('sqrt2'))
        self._record('harman_c0', {'gamma': 'sqrt2', 'psi': 'c_over_q:1/2:2', 'q_max': q_max},
                     format_value(est.c0))

    def counting(self):
        q = self.params['counting_q']
        psi = ApproxFunction('c_over_q_loglog2', c=1)
        report = counting_lemma_ratio(range(16, q + 1), psi, preset('sqrt2'))
        self._record('counting_max_ratio', {'gamma': 'sqrt2', 'psi': 'c_over_q_loglog2:1', 'q_max': q},
                     format_value(report.fitted['max_ratio']))

    def bkl(self):
        k = self.params['bkl_k']
        report = bkl_counts(preset('sqrt2'), 0, k)
        counts = {f"{row['k']}:{row['l']}": row['count'] for row in report.rows}
        self._record('bkl_counts', {'beta': 'sqrt2', 'gamma2': '0', 'k_max': k}, counts)
        self._record('bkl_c', {'beta': 'sqrt2', 'gamma2': '0', 'k_max': k}, format_value(report.fitted.get('c')))

    def sieve(self):
        Q = self.params['sieve_Q']
        report = hardy_ramanujan_sieve(half_over_q(), Q, '0.1')
        params = {'psi': 'c_over_q:1/2:2', 'Q': Q, 'epsilon': '0.1'}
        self._record('hr_removed_count', params, report.fitted['removed_count'])
        self._record('hr_max_ratio', params, format_value(report.fitted['max_ratio']))

    def ratio(self):
        Q = self.params['ratio_Q']
        fact = cf_ratio_fact_check(Q)
        self._record('cf_ratio_min', {'Q': Q}, format_value(fact.min_ratio))
        self._record('cf_ratio_argmin', {'Q': Q}, fact.argmin)

    def discrepancy(self):
        N = self.params['discrepancy_N']
        self._record('discrepancy_golden_sha256', {'gamma': 'golden', 'N': N, 'H': 50}, discrepancy_digest(N))

    def run(self):
        """Compute every oracle and write the document; returns a name/value report."""
        print("=" * 60)
        print(f"ORACLE RUNNER - {self.scale} scale")
        print("=" * 60)
        print(f"Execution Time: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}")
        print()

        steps = [
            ('Coverage union', self.coverage),
            ('Harman constant', self.harman),
            ('Counting-lemma ratio', self.counting),
            ('B_{k,l} counts', self.bkl),
            ('Omega sieve', self.sieve),
            ('Divisor ratio extremes', self.ratio),
            ('Golden-ratio discrepancy', self.discrepancy),
        ]
        started = time.perf_counter()
        for i, (title, step) in enumerate(steps, start=1):
            print(f"\n[Step {i}] {title}...")
            reset_presets()
            step()

        write_json(self.path, {'version': __version__, 'scale': self.scale, 'oracles': self.entries})
        print("\n" + "=" * 60)
        print(f"SUMMARY: {len(self.entries)} oracles frozen in {time.perf_counter() - started:.1f}s -> {self.path}")
        print("=" * 60)
        report = ExperimentReport('oracles', ['name', 'value'], header=f"frozen oracles, {self.scale} scale")
        for name, entry in sorted(self.entries.items()):
            value = entry['value']
            report.add(name=name, value=json.dumps(value, sort_keys=True) if isinstance(value, dict) else value)
        report.fitted['path'] = self.path
        return report
