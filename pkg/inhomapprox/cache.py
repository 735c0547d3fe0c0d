"""
Cache Module - Memoized Approximation Sets
==========================================
Uses cachelib (the backend library under Flask-Caching) with Redis for
sharing approximation sets between runs and processes. Falls back to an
in-process SimpleCache if Redis is unavailable or not requested.

Cached values are exact objects, so a hit and a recomputation always give
identical results; the cache only saves time.

Configuration:
    CACHE_TYPE=RedisCache and REDIS_URL select the Redis backend.
    The default CACHE_TYPE=SimpleCache never touches the network.
"""
import hashlib
import logging
import threading

from cachelib import RedisCache, SimpleCache

logger = logging.getLogger(__name__)

# Module-level cache instance
_cache = None
_cache_lock = threading.Lock()


def _get_config():
    """Get the module config (avoids circular imports)."""
    from . import get_module_config
    return get_module_config()


def init_cache(redis_url=None, cache_type=None):
    """
    Initialize the cache backend.

    Args:
        redis_url: Optional Redis URL override.
        cache_type: 'RedisCache' or 'SimpleCache'; defaults to the module config.

    Returns:
        The cachelib backend in use.

    Falls back to SimpleCache if the Redis connection fails.
    """
    global _cache
    settings = _get_config().get_cache_config()
    cache_type = cache_type or settings['type']
    prefix = settings['key_prefix']
    timeout = settings['default_timeout']

    with _cache_lock:
        if cache_type == 'RedisCache':
            try:
                import redis
                client = redis.from_url(redis_url or settings['redis_url'])
                backend = RedisCache(host=client, key_prefix=prefix, default_timeout=timeout)
                # Test the connection
                backend.set('_ping', 'pong', timeout=5)
                if backend.get('_ping') == 'pong':
                    backend.delete('_ping')
                    logger.info("[Cache] Redis connected successfully")
                    _cache = backend
                    return _cache
            except Exception as e:
                logger.warning("[Cache] Redis unavailable (%s), falling back to SimpleCache", e)

        # Fallback to in-memory SimpleCache
        _cache = SimpleCache(threshold=50_000, default_timeout=timeout)
        logger.debug("[Cache] Using SimpleCache (in-memory)")
        return _cache


def get_cache():
    """Return the active backend, initializing it on first use."""
    if _cache is None:
        init_cache()
    return _cache


def make_cache_key_aq(q, psi_key, gamma_key):
    """
    Create a cache key for an approximation set A_q.
    gamma_key must pin the rational approximation in use (name plus digits),
    so refining gamma never serves a stale set.
    """
    if len(psi_key) > 120:
        # table-backed psi keys grow with the table
        psi_key = hashlib.sha256(psi_key.encode()).hexdigest()
    return f"aq:{q}:{psi_key}:{gamma_key}"


def cached(key, compute):
    """Return the cached value for key, computing and storing it on a miss."""
    backend = get_cache()
    try:
        value = backend.get(key)
        if value is not None:
            return value
    except Exception as e:
        logger.warning("[Cache] Warning: read failed for %s: %s", key, e)
        value = None

    value = compute()
    try:
        backend.set(key, value)
    except Exception as e:
        logger.warning("[Cache] Warning: could not store %s: %s", key, e)
    return value


def clear_approx_cache():
    """Clear all cached approximation sets."""
    try:
        get_cache().clear()
        logger.info("[Cache] All approximation-set entries cleared")
    except Exception as e:
        logger.warning("[Cache] Warning: could not clear cache: %s", e)
