"""
Command Line
============
Subcommands over the library, experiment files, and deterministic report
emission.

Every run writes <out>/<subcommand>.csv (header row, LF, UTF-8) and
<out>/<subcommand>.json (the same rows plus fitted values, notes, a status
dict and the run manifest). CSV payloads depend only on the config and
seed; the manifest's wall time lives in the JSON only.

Exit codes:
    0  every asserted check passed
    1  an assertion failed
    2  more indeterminate decisions than --indeterminate-cap
    3  a budget or the sieve range was exceeded
    4  invalid configuration or flags

Usage:
    python run.py coverage --config experiment.toml --threads 8
    python run.py discrepancy --gamma golden --N 2000 --H 50
"""
import argparse
import csv
import dataclasses
import hashlib
import io
import json
import logging
import os
import sys
import time
from typing import Any, Dict

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from . import __version__, get_module_config, init_approx_module
from . import arith, bounds, experiments, realnum, rotation
from .approxfun import ApproxFunction, dyadic_checkpoints, wex_scan
from .errors import ConfigError, InhomApproxError
from .experiments import ExperimentConfig, ExperimentReport
from .reports import format_value
from .storage import atomic_writer, write_csv, write_json

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_ASSERTION = 1
EXIT_INDETERMINATE = 2
SELF_TEST_THREADS = (1, 2, 8)
SELF_TEST_SUBCOMMANDS = ('coverage', 'highdim', 'discrepancy', 'master-check')

_INT_FIELDS = ('Q', 'H', 'k', 'seed', 'precision_digits', 'threads', 'indeterminate_cap', 'N', 'K', 'mc_points')
_REAL_FIELDS = ('gamma', 'beta', 'gamma2')


# ─── Experiment files ───

def default_config():
    """An ExperimentConfig whose run defaults come from the module config."""
    config = get_module_config()
    return ExperimentConfig(seed=config.DEFAULT_SEED, precision_digits=config.PRECISION_DIGITS,
                            threads=config.THREADS, out=config.REPORT_DIR,
                            indeterminate_cap=config.INDETERMINATE_CAP, mc_points=config.MC_POINTS)


def _as_text(value, key):
    if isinstance(value, bool) or not isinstance(value, (str, int, float)):
        raise ConfigError(f"expected a string or number, got {value!r}", key=key)
    return value if isinstance(value, str) else repr(value)


def _normalize(data):
    """Type-check a raw mapping into ExperimentConfig keyword arguments."""
    fields = {f.name for f in dataclasses.fields(ExperimentConfig) if f.init}
    out = {}
    for key, value in data.items():
        if key not in fields:
            raise ConfigError("unknown key", key=key)
        if key in _INT_FIELDS:
            if isinstance(value, bool) or not isinstance(value, int):
                raise ConfigError(f"expected an integer, got {value!r}", key=key)
        elif key in _REAL_FIELDS or key in ('epsilon', 'out'):
            value = _as_text(value, key)
        elif key == 'gammas':
            if not isinstance(value, (list, tuple)):
                raise ConfigError("expected a list", key=key)
            value = tuple(_as_text(v, f"gammas[{i}]") for i, v in enumerate(value))
        elif key == 'schedule':
            if not isinstance(value, (list, tuple)) or not all(
                    isinstance(v, int) and not isinstance(v, bool) for v in value):
                raise ConfigError("expected a list of integers", key=key)
            value = tuple(value)
        elif key == 'psi':
            if isinstance(value, str):
                value = {'family': value}
            if not isinstance(value, dict):
                raise ConfigError("expected a table", key=key)
            unknown = set(value) - {'family', 'c', 'q0', 'filters', 'table'}
            if unknown:
                raise ConfigError("unknown key", key=f"psi.{sorted(unknown)[0]}")
            value = dict(value)
        out[key] = value
    return out


def _finish(cfg):
    """Validate and normalize psi to its canonical mapping."""
    cfg.validate()
    if not isinstance(cfg.psi, ApproxFunction):
        cfg.psi = cfg.psi_function().to_config()
    return cfg


def parse_config(path, overrides=None):
    """
    Read an experiment file (TOML) into a validated ExperimentConfig.

    Args:
        path: file path.
        overrides: mapping of keys that replace file values (CLI flags).

    Raises:
        ConfigError: on syntax errors (with line and column) and on invalid
            keys or values (naming the key path).
    """
    try:
        with open(path, 'rb') as fh:
            data = tomllib.load(fh)
    except FileNotFoundError as e:
        raise ConfigError(f"no such file: {path}", key='config') from e
    except tomllib.TOMLDecodeError as e:
        raise ConfigError(f"{path}: {e}", key='syntax') from e
    return config_from_mapping(data, overrides)


def config_from_mapping(data, overrides=None):
    merged = dict(data)
    merged.update(overrides or {})
    return _finish(dataclasses.replace(default_config(), **_normalize(merged)))


def _toml_value(value):
    if isinstance(value, bool):
        return 'true' if value else 'false'
    if isinstance(value, int):
        return str(value)
    if isinstance(value, (list, tuple)):
        return '[' + ', '.join(_toml_value(v) for v in value) + ']'
    return json.dumps(str(value))


def emit_config(cfg):
    """The TOML text of a config; parse_config reads it back to an equal config."""
    lines = []
    for f in dataclasses.fields(cfg):
        if not f.init or f.name == 'psi':
            continue
        lines.append(f"{f.name} = {_toml_value(getattr(cfg, f.name))}")
    psi = cfg.psi_config()
    lines.append('')
    lines.append('[psi]')
    for key in ('family', 'c', 'q0', 'filters'):
        if key in psi:
            lines.append(f"{key} = {_toml_value(psi[key])}")
    if psi.get('table'):
        lines.append('')
        lines.append('[psi.table]')
        for q, v in psi['table'].items():
            lines.append(f"{json.dumps(str(q))} = {_toml_value(v)}")
    return '\n'.join(lines) + '\n'


# ─── Manifest and output ───

@dataclasses.dataclass
class RunManifest:
    """What produced a report; everything but wall_time is reproducible."""

    version: str
    subcommand: str
    config_hash: str
    precision_policy: Dict[str, Any]
    seed: int
    threads: int
    wall_time: float = 0.0
    summary: Dict[str, Any] = dataclasses.field(default_factory=dict)

    def to_dict(self):
        return dataclasses.asdict(self)


def config_hash(cfg):
    return hashlib.sha256(emit_config(cfg).encode('utf-8')).hexdigest()


def render_csv(report):
    """The CSV payload of a report as text."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator='\n')
    writer.writerow(report.columns)
    writer.writerows(report.table())
    return buffer.getvalue()


def status_of(report, cap):
    """(exit code, status dict) for a finished report."""
    if report.passed is False:
        return EXIT_ASSERTION, {'success': False, 'status': 'failed',
                                'error': f"{len(report.failures)} assertion(s) failed"}
    if report.indeterminate > cap:
        return EXIT_INDETERMINATE, {'success': False, 'status': 'indeterminate',
                                    'error': f"{report.indeterminate} indeterminate decisions exceed the cap {cap}"}
    return EXIT_OK, {'success': True, 'status': 'ok', 'error': None}


# ─── Subcommands ───

def _psi(cfg):
    return cfg.psi_function()


def _report_from_rows(name, columns, rows, **fitted):
    report = ExperimentReport(name, list(columns), header='')
    for row in rows:
        report.rows.append(row)
    report.fitted.update(fitted)
    return report


def cmd_discrepancy(cfg, args):
    return rotation.verify_72_bound(cfg.gamma_real(), range(1, cfg.N + 1), cfg.N,
                                    sigma_mode='N', H=cfg.H, threads=cfg.threads)


def cmd_master_check(cfg, args):
    bcfg = bounds.BoundsConfig(_psi(cfg), cfg.gamma_real(), H=cfg.H, q_max=cfg.Q)
    return bounds.master_scan(bcfg, threads=cfg.threads)


def cmd_counting_sum(cfg, args):
    return bounds.counting_lemma_ratio(range(16, cfg.Q + 1), _psi(cfg), cfg.gamma_real(),
                                       normalization=args.normalization, threads=cfg.threads)


def cmd_harman_c0(cfg, args):
    est = bounds.harman_c0_estimate(cfg.Q, _psi(cfg), cfg.gamma_real(), threads=cfg.threads)
    marks = dyadic_checkpoints(cfg.Q)
    rows = [{'q': q, 'running_c0': est.running[q - 1]} for q in marks]
    return _report_from_rows('harman-c0', ['q', 'running_c0'], rows, C0=est.c0,
                             pair='' if est.pair is None else f"{est.pair[0]}:{est.pair[1]}",
                             pairs_examined=est.pairs_examined)


def cmd_f_tail(cfg, args):
    threshold = 2 * arith.zeta_constants(cfg.K).C_log2 * cfg.K ** 2
    tail = arith.f_tail_count(cfg.Q, threshold)
    bound = cfg.Q / 2 ** cfg.K
    row = {'Q': cfg.Q, 'K': cfg.K, 'threshold': threshold, 'count': tail.count,
           'indeterminate': tail.indeterminate, 'bound': bound, 'pass': tail.count + tail.indeterminate <= bound}
    return _report_from_rows('f-tail', list(row), [row])


def cmd_moments(cfg, args):
    check = bounds.f_moment_tail_check(cfg.Q, cfg.K)
    row = dataclasses.asdict(check)
    row['pass'] = row.pop('passed')
    return _report_from_rows('moments', list(row), [row])


def cmd_coverage(cfg, args):
    return experiments.union_coverage_scan(cfg)


def cmd_multiplicative(cfg, args):
    return experiments.multiplicative_pipeline(_psi(cfg), realnum.parse_real(cfg.beta), cfg.gamma_real(),
                                               realnum.parse_real(cfg.gamma2), cfg.Q,
                                               schedule=cfg.schedule or None, threads=cfg.threads)


def cmd_highdim(cfg, args):
    return experiments.highdim_experiment(cfg)


def cmd_szusz_shrink(cfg, args):
    return experiments.szusz_shrink(_psi(cfg), cfg.Q, restrict_K=args.restrict_K).report


def cmd_bkl(cfg, args):
    return experiments.bkl_counts(realnum.parse_real(cfg.beta), realnum.parse_real(cfg.gamma2), args.k_max)


def cmd_hr_sieve(cfg, args):
    return experiments.hardy_ramanujan_sieve(_psi(cfg), cfg.Q, cfg.epsilon)


def cmd_cf_ratio(cfg, args):
    return experiments.cf_ratio_fact_check(cfg.Q).as_report()


def cmd_sigma(cfg, args):
    gamma = cfg.gamma_real()
    running = realnum.sigma_running(gamma, max(cfg.Q, 2))
    profile = realnum.sigma_of_Q(gamma, max(cfg.Q, 2))
    rows = [{'Q': Q, 'sigma': running[Q]} for Q in dyadic_checkpoints(cfg.Q, start=2)]
    return _report_from_rows('sigma', ['Q', 'sigma'], rows, sigma=profile.sigma, sigma_lo=profile.sigma_lo,
                             sigma_hi=profile.sigma_hi, witness=profile.witness, threshold=profile.threshold,
                             classification=f"{profile.classification} (provisional)")


def cmd_cf(cfg, args):
    expansion = realnum.cf_expand(cfg.gamma_real(), args.terms)
    rows = [{'i': i, 'a': a, 'p': p, 'q': q}
            for i, (a, (p, q)) in enumerate(zip(expansion.quotients, expansion.convergents))]
    return _report_from_rows('cf', ['i', 'a', 'p', 'q'], rows, complete=expansion.complete,
                             terminated=expansion.terminated)


def cmd_liouville_scan(cfg, args):
    scan = realnum.liouville_set_scan(cfg.gamma_real(), cfg.Q, lambda Q: args.sigma)
    rows = [{'Q': Q, 'member': True} for Q in scan.members]
    rows += [{'Q': Q, 'member': None} for Q in scan.indeterminate]
    rows.sort(key=lambda r: r['Q'])
    report = _report_from_rows('liouville-scan', ['Q', 'member'], rows, sigma=args.sigma,
                               members=len(scan.members))
    report.indeterminate = len(scan.indeterminate)
    return report


def cmd_wex(cfg, args):
    starts = [Q for Q in dyadic_checkpoints(cfg.Q, start=16) if Q & (Q - 1) == 0]
    result = wex_scan(_psi(cfg), starts)
    rows = [{'Q': w.Q, 'upper': w.upper, 'window_sum': w.window_sum, 'capped': w.capped}
            for w in result.wex_windows]
    sums = [w.window_sum for w in result.wex_windows]
    return _report_from_rows('wex', ['Q', 'upper', 'window_sum', 'capped'], rows,
                             increasing=all(b > a for a, b in zip(sums, sums[1:])),
                             capped=result.window_capped)


def cmd_self_test(cfg, args):
    """Re-run each deterministic subcommand at 1, 2 and 8 threads and compare CSV bytes."""
    report = ExperimentReport('self-test', ['subcommand', 'threads', 'sha256', 'pass'],
                              header='CSV payloads must not depend on the thread count')
    small = dataclasses.replace(cfg, Q=min(cfg.Q, 64), N=min(cfg.N, 200), mc_points=min(cfg.mc_points, 20_000),
                                schedule=())
    for name in SELF_TEST_SUBCOMMANDS:
        reference = None
        for threads in SELF_TEST_THREADS:
            realnum.reset_presets()
            payload = render_csv(SUBCOMMANDS[name](dataclasses.replace(small, threads=threads), args))
            digest = hashlib.sha256(payload.encode('utf-8')).hexdigest()
            reference = reference or digest
            report.add(subcommand=name, threads=threads, sha256=digest, **{'pass': digest == reference})
    return report


def cmd_freeze_oracles(cfg, args):
    from .oracles import OracleRunner
    return OracleRunner(path=args.output, scale=args.scale).run()


SUBCOMMANDS = {
    'discrepancy': cmd_discrepancy,
    'master-check': cmd_master_check,
    'counting-sum': cmd_counting_sum,
    'harman-c0': cmd_harman_c0,
    'f-tail': cmd_f_tail,
    'moments': cmd_moments,
    'coverage': cmd_coverage,
    'multiplicative': cmd_multiplicative,
    'highdim': cmd_highdim,
    'szusz-shrink': cmd_szusz_shrink,
    'bkl': cmd_bkl,
    'hr-sieve': cmd_hr_sieve,
    'cf-ratio': cmd_cf_ratio,
    'sigma': cmd_sigma,
    'cf': cmd_cf,
    'liouville-scan': cmd_liouville_scan,
    'wex': cmd_wex,
    'self-test': cmd_self_test,
    'freeze-oracles': cmd_freeze_oracles,
}


# ─── Argument parsing ───

class ArgumentParser(argparse.ArgumentParser):
    """argparse that raises ConfigError (exit 4) instead of exiting with 2."""

    def error(self, message):
        raise ConfigError(message, key='argv')


def _int_list(text):
    try:
        return [int(x) for x in text.split(',') if x.strip()]
    except ValueError as e:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from e


def _psi_flag(text):
    """'family', 'family:c' or 'family:c:q0'."""
    parts = text.split(':')
    if len(parts) > 3:
        raise argparse.ArgumentTypeError(f"expected family[:c[:q0]], got {text!r}")
    psi = {'family': parts[0]}
    if len(parts) > 1:
        psi['c'] = parts[1]
    if len(parts) > 2:
        try:
            psi['q0'] = int(parts[2])
        except ValueError as e:
            raise argparse.ArgumentTypeError(f"q0 must be an integer, got {parts[2]!r}") from e
    return psi


def build_parser():
    common = ArgumentParser(add_help=False)
    common.add_argument('--config', help='experiment file (TOML)')
    common.add_argument('--gamma')
    common.add_argument('--gammas', type=lambda s: [x.strip() for x in s.split(',')],
                        help='comma-separated shifts for highdim')
    common.add_argument('--beta')
    common.add_argument('--gamma2')
    common.add_argument('--psi', type=_psi_flag, help='family[:c[:q0]]')
    common.add_argument('--filter', action='append', dest='filters', help='support filter, repeatable')
    common.add_argument('--Q', type=int)
    common.add_argument('--schedule', type=_int_list, help='comma-separated checkpoints')
    common.add_argument('--H', type=int)
    common.add_argument('--k', type=int)
    common.add_argument('--N', type=int)
    common.add_argument('--K', type=int)
    common.add_argument('--epsilon')
    common.add_argument('--mc-points', type=int)
    common.add_argument('--precision-digits', type=int)
    common.add_argument('--seed', type=int)
    common.add_argument('--threads', type=int)
    common.add_argument('--out')
    common.add_argument('--indeterminate-cap', type=int)
    common.add_argument('--verbose', '-v', action='store_true')

    parser = ArgumentParser(prog='inhomapprox', description='Inhomogeneous approximation verifiers')
    parser.add_argument('--version', action='version', version=f"inhomapprox {__version__}")
    sub = parser.add_subparsers(dest='subcommand', metavar='subcommand')
    sub.required = True
    parsers = {name: sub.add_parser(name, parents=[common]) for name in SUBCOMMANDS}
    parsers['counting-sum'].add_argument('--normalization', choices=('tame', 'linear'), default='tame')
    parsers['szusz-shrink'].add_argument('--restrict-K', type=int, dest='restrict_K')
    parsers['bkl'].add_argument('--k-max', type=int, default=13)
    parsers['cf'].add_argument('--terms', type=int, default=20)
    parsers['liouville-scan'].add_argument('--sigma', type=int, default=2)
    parsers['freeze-oracles'].add_argument('--output', default=os.path.join('data', 'oracles.json'))
    parsers['freeze-oracles'].add_argument('--scale', choices=('desk', 'acceptance'), default='desk')
    for name in SUBCOMMANDS:
        parsers[name].set_defaults(normalization='tame', restrict_K=None, k_max=13, terms=20, sigma=2,
                                   output=os.path.join('data', 'oracles.json'), scale='desk')
    return parser


def _overrides(args):
    out = {}
    for key in ('gamma', 'gammas', 'beta', 'gamma2', 'Q', 'schedule', 'H', 'k', 'N', 'K', 'epsilon',
                'mc_points', 'precision_digits', 'seed', 'threads', 'out', 'indeterminate_cap'):
        value = getattr(args, key, None)
        if value is not None:
            out[key] = value
    if args.psi is not None:
        out['psi'] = args.psi
    return out


def load_config(args):
    """Config file (if any) overlaid with the flags; --filter replaces the psi filters."""
    overrides = _overrides(args)
    cfg = parse_config(args.config, overrides) if args.config else config_from_mapping({}, overrides)
    if args.filters:
        cfg = _finish(dataclasses.replace(cfg, psi=dict(cfg.psi_config(), filters=list(args.filters))))
    return cfg


# ─── Running ───

def run(subcommand, cfg, args=None):
    """
    Run one subcommand and write its CSV and JSON atomically.

    Returns:
        (exit code, report)
    """
    if subcommand not in SUBCOMMANDS:
        raise ConfigError(f"unknown subcommand {subcommand!r}", key='subcommand')
    args = args or build_parser().parse_args([subcommand])
    init_approx_module(get_module_config(), PRECISION_DIGITS=cfg.precision_digits, THREADS=cfg.threads,
                       INDETERMINATE_CAP=cfg.indeterminate_cap)
    realnum.reset_presets()
    manifest = RunManifest(version=__version__, subcommand=subcommand, config_hash=config_hash(cfg),
                           precision_policy=get_module_config().get_precision_policy(),
                           seed=cfg.seed, threads=cfg.threads)

    print("=" * 60)
    print(f"INHOMAPPROX - {subcommand}")
    print("=" * 60)
    print(f"Config hash: {manifest.config_hash[:16]}  seed={cfg.seed}  threads={cfg.threads}")

    started = time.perf_counter()
    report = SUBCOMMANDS[subcommand](cfg, args)
    manifest.wall_time = round(time.perf_counter() - started, 3)
    code, status = status_of(report, cfg.indeterminate_cap)
    manifest.summary = {'rows': len(report.rows), 'passed': report.passed,
                        'indeterminate': report.indeterminate, 'exit_code': code}

    stem = os.path.join(cfg.out, subcommand)
    write_csv(stem + '.csv', report.columns, report.table())
    write_json(stem + '.json', {'report': report.to_dict(), 'manifest': manifest.to_dict(), 'status': status})
    with atomic_writer(stem + '.toml') as fh:
        fh.write(emit_config(cfg))

    print(f"\n  Rows: {len(report.rows)}  indeterminate: {report.indeterminate}")
    for key, value in report.fitted.items():
        print(f"  {key}: {format_value(value)}")
    print("\n" + "=" * 60)
    print(f"SUMMARY: {status['status']} (exit {code}) in {manifest.wall_time}s -> {stem}.csv")
    print("=" * 60)
    return code, report


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        logging.basicConfig(level=logging.DEBUG if args.verbose else logging.INFO,
                            format='%(levelname)s %(name)s: %(message)s')
        cfg = load_config(args)
        code, _ = run(args.subcommand, cfg, args)
        return code
    except InhomApproxError as e:
        logger.error("%s: %s", type(e).__name__, e)
        print(f"Error: {e}", file=sys.stderr)
        return e.exit_code
    except ValueError as e:
        print(f"Error: {e}", file=sys.stderr)
        return ConfigError.exit_code

