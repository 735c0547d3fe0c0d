"""
Shared fixtures: a fresh module config per test, small sieve tables,
exact rational psi stand-ins and a scratch report directory.
"""
from fractions import Fraction

import pytest

from inhomapprox import init_approx_module
from inhomapprox.arith import clear_tables, get_sieve
from inhomapprox.approxfun import ApproxFunction
from inhomapprox.cache import clear_approx_cache
from inhomapprox.realnum import reset_presets


@pytest.fixture(autouse=True)
def approx_config(tmp_path):
    """Default configuration, an in-memory cache and fresh preset constants."""
    config = init_approx_module(SIEVE_CACHE_PATH=str(tmp_path / 'sieve.bin'), CACHE_TYPE='SimpleCache',
                                THREADS=1)
    reset_presets()
    yield config
    clear_approx_cache()
    reset_presets()


@pytest.fixture
def small_sieve():
    clear_tables()
    yield get_sieve(10_000)
    clear_tables()


@pytest.fixture
def half_over_q():
    """psi(q) = 1/(2q) from q = 2 on."""
    return ApproxFunction('c_over_q', c='1/2', q0=2)


@pytest.fixture
def tenth():
    """psi identically 1/10, exact (not quantized)."""
    return lambda q: Fraction(1, 10)


@pytest.fixture
def report_dir(tmp_path):
    path = tmp_path / 'reports'
    path.mkdir()
    return path
