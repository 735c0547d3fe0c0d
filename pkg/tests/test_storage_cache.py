import json
import os
import threading
from fractions import Fraction

import numpy as np
import pytest
from cachelib import SimpleCache

from inhomapprox.arith import build_sieve, clear_tables, get_sieve
from inhomapprox.cache import cached, clear_approx_cache, get_cache, init_cache, make_cache_key_aq
from inhomapprox.pool import ordered_map
from inhomapprox.realnum import Ball
from inhomapprox.reports import BoundsReport, format_value
from inhomapprox.storage import atomic_writer, load_sieve, save_sieve, write_csv, write_json


class TestStorage:
    def test_atomic_writer_leaves_no_temporaries(self, tmp_path):
        path = tmp_path / 'nested' / 'out.txt'
        with atomic_writer(str(path)) as fh:
            fh.write('done\n')
        assert path.read_text(encoding='utf-8') == 'done\n'
        assert os.listdir(path.parent) == ['out.txt']

    def test_atomic_writer_keeps_the_old_file_on_error(self, tmp_path):
        path = tmp_path / 'w' / 'out.txt'
        path.parent.mkdir()
        path.write_text('old', encoding='utf-8')
        with pytest.raises(RuntimeError):
            with atomic_writer(str(path)) as fh:
                fh.write('new')
                raise RuntimeError('boom')
        assert path.read_text(encoding='utf-8') == 'old'
        assert os.listdir(path.parent) == ['out.txt']

    def test_csv_uses_lf(self, tmp_path):
        path = tmp_path / 'r.csv'
        write_csv(str(path), ['a', 'b'], [['1', '1/2'], ['2', '']])
        assert path.read_bytes() == b'a,b\n1,1/2\n2,\n'

    def test_json_is_sorted(self, tmp_path):
        path = tmp_path / 'r.json'
        write_json(str(path), {'b': 1, 'a': [1, 2]})
        text = path.read_text(encoding='utf-8')
        assert text.index('"a"') < text.index('"b"')
        assert json.loads(text) == {'a': [1, 2], 'b': 1}

    def test_sieve_round_trip(self, tmp_path):
        table = build_sieve(500)
        path = str(tmp_path / 'sieve.bin')
        save_sieve(table, path)
        loaded = load_sieve(path)
        assert loaded.limit == 500
        for name in ('phi', 'd', 'omega', 'spf'):
            assert np.array_equal(getattr(loaded, name), getattr(table, name))

    def test_get_sieve_writes_the_cache(self, approx_config):
        clear_tables()
        table = get_sieve(300)
        cached_table = load_sieve(approx_config.SIEVE_CACHE_PATH)
        assert cached_table.limit == 300
        assert np.array_equal(cached_table.phi, table.phi)
        clear_tables()

    def test_missing_sieve(self, tmp_path):
        assert load_sieve(str(tmp_path / 'absent.bin')) is None

    def test_bad_magic(self, tmp_path):
        path = tmp_path / 'sieve.bin'
        path.write_bytes(b'NOTASIEVE' + bytes(64))
        with pytest.raises(ValueError, match='magic'):
            load_sieve(str(path))

    def test_truncated(self, tmp_path):
        path = str(tmp_path / 'sieve.bin')
        save_sieve(build_sieve(100), path)
        with open(path, 'rb') as fh:
            raw = fh.read()
        with open(path, 'wb') as fh:
            fh.write(raw[:-8])
        with pytest.raises(ValueError, match='truncated'):
            load_sieve(path)


class TestCache:
    def test_short_keys_are_readable(self):
        assert make_cache_key_aq(7, 'c_over_q:1/2:2', 'sqrt2@64') == 'aq:7:c_over_q:1/2:2:sqrt2@64'

    def test_long_psi_keys_are_hashed(self):
        key = make_cache_key_aq(7, 'table:' + 'x' * 200, 'sqrt2@64')
        parts = key.split(':')
        assert parts[0] == 'aq' and parts[1] == '7'
        assert len(parts[2]) == 64
        assert make_cache_key_aq(7, 'table:' + 'x' * 200, 'sqrt2@64') == key

    def test_computes_once(self):
        calls = []

        def compute():
            calls.append(1)
            return Fraction(1, 3)

        assert cached('k', compute) == Fraction(1, 3)
        assert cached('k', compute) == Fraction(1, 3)
        assert len(calls) == 1

    def test_clear(self):
        cached('k', lambda: 5)
        clear_approx_cache()
        assert get_cache().get('k') is None

    def test_unreachable_redis_falls_back(self):
        backend = init_cache(redis_url='redis://127.0.0.1:1/0', cache_type='RedisCache')
        assert isinstance(backend, SimpleCache)
        assert get_cache() is backend


class TestPool:
    @pytest.mark.parametrize('threads', [1, 2, 8])
    def test_results_keep_input_order(self, threads):
        assert ordered_map(lambda x: x * x, range(50), threads) == [x * x for x in range(50)]

    def test_uses_worker_threads(self):
        names = set(ordered_map(lambda _: threading.current_thread().name, range(16), 4))
        assert threading.current_thread().name not in names

    def test_defaults_to_configured_threads(self, approx_config):
        approx_config.THREADS = 1
        names = set(ordered_map(lambda _: threading.current_thread().name, range(4)))
        assert names == {threading.current_thread().name}


class TestReports:
    @pytest.mark.parametrize('value, text', [
        (None, ''),
        (True, 'true'),
        (False, 'false'),
        (3, '3'),
        (Fraction(3, 4), '3/4'),
        (Fraction(4, 2), '2'),
        (Ball(Fraction(1, 3), Fraction(0)), '1/3'),
        (0.5, '0.5'),
        ([1, Fraction(1, 2)], '1 1/2'),
        ('text', 'text'),
    ])
    def test_format_value(self, value, text):
        assert format_value(value) == text

    def test_ball_with_radius(self):
        assert format_value(Ball(Fraction(1, 4), Fraction(1, 10 ** 10))) == '0.25±1e-10'

    def test_passed(self):
        report = BoundsReport('x', ['v', 'pass'])
        assert report.passed is None
        report.add(v=1, **{'pass': None})
        assert report.passed is None
        report.add(v=2, **{'pass': True})
        assert report.passed is True
        report.add(v=3, **{'pass': False})
        assert report.passed is False
        assert [row['v'] for row in report.failures] == [3]

    def test_to_dict(self):
        report = BoundsReport('x', ['v'])
        report.add(v=Fraction(1, 2))
        report.fitted['c'] = Fraction(2, 3)
        data = report.to_dict()
        assert data['rows'] == [['1/2']]
        assert data['fitted'] == {'c': '2/3'}
