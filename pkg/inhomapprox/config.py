"""
Library Configuration
=====================
Defaults for precision, sieve sizes, budgets and the cache backend.
Values come from the environment (or a .env file); a parent application
can inject its own instance via init_approx_module().
"""
import os
from dotenv import load_dotenv

load_dotenv()


class ApproxConfig:
    """Library-wide configuration."""

    # Arithmetic tables
    SIEVE_LIMIT = int(os.getenv('INHOM_SIEVE_LIMIT', 1_000_000))
    SIEVE_CACHE_PATH = os.getenv('INHOM_SIEVE_CACHE_PATH', 'data/sieve.bin')

    # Certified reals (decimal digits)
    PRECISION_DIGITS = int(os.getenv('INHOM_PRECISION_DIGITS', 64))
    PRECISION_CAP = int(os.getenv('INHOM_PRECISION_CAP', 65536))      # 2^16 digits

    # Budgets
    EXACT_Q_BUDGET = int(os.getenv('INHOM_EXACT_Q_BUDGET', 10_000))   # largest Q for exact unions
    WEX_CAP_LOG2 = int(os.getenv('INHOM_WEX_CAP_LOG2', 40))           # window upper limit 2^40
    WEX_TERM_BUDGET = int(os.getenv('INHOM_WEX_TERM_BUDGET', 2 ** 32))

    # Monte Carlo
    MC_POINTS = int(os.getenv('INHOM_MC_POINTS', 1_000_000))
    MC_SHARDS = int(os.getenv('INHOM_MC_SHARDS', 16))
    DEFAULT_SEED = int(os.getenv('INHOM_DEFAULT_SEED', 0))

    # Runs
    THREADS = int(os.getenv('INHOM_THREADS', 1))
    INDETERMINATE_CAP = int(os.getenv('INHOM_INDETERMINATE_CAP', 0))
    REPORT_DIR = os.getenv('INHOM_REPORT_DIR', 'reports')

    # Cache backend
    CACHE_TYPE = os.getenv('CACHE_TYPE', 'SimpleCache')              # or RedisCache
    REDIS_URL = os.getenv('REDIS_URL', 'redis://localhost:6379/0')
    CACHE_DEFAULT_TIMEOUT = int(os.getenv('CACHE_DEFAULT_TIMEOUT', 0))  # 0 = never expire
    CACHE_KEY_PREFIX = os.getenv('CACHE_KEY_PREFIX', 'inhom:')

    def get_precision_policy(self):
        """Precision policy as a dict, as recorded in run manifests."""
        return {
            'start_digits': self.PRECISION_DIGITS,
            'cap_digits': self.PRECISION_CAP,
            'growth': 'double',
        }

    def get_cache_config(self):
        """Cache backend settings as a dict."""
        return {
            'type': self.CACHE_TYPE,
            'redis_url': self.REDIS_URL,
            'default_timeout': self.CACHE_DEFAULT_TIMEOUT,
            'key_prefix': self.CACHE_KEY_PREFIX,
        }


Config = ApproxConfig
