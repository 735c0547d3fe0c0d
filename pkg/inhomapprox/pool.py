"""
Worker Pool
===========
Order-preserving parallel map. Results come back in input order whatever
the thread count, so every reduction over them is deterministic.
"""
import logging
from concurrent.futures import ThreadPoolExecutor

logger = logging.getLogger(__name__)


def _get_config():
    """Get the module config (avoids circular imports)."""
    from . import get_module_config
    return get_module_config()


def ordered_map(fn, items, threads=None):
    """
    Apply fn to every item, returning results in input order.

    Args:
        fn: callable of one argument; must not depend on call order.
        items: iterable of inputs.
        threads: worker count; defaults to the configured THREADS.
    """
    items = list(items)
    threads = threads or _get_config().THREADS
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    logger.debug("[Pool] %d tasks on %d threads", len(items), threads)
    with ThreadPoolExecutor(max_workers=threads) as executor:
        return list(executor.map(fn, items))
