"""
Storage Utilities
=================
Atomic report writing and the binary sieve cache.

Every artefact is written to a temporary sibling and moved into place with
os.replace(), so readers never observe a half-written report.

Sieve cache layout (all little-endian):
    b"MDLSIEVE1" | limit: u64 | phi | d | omega | spf   (int64[limit + 1] each)
"""
import csv
import json
import logging
import os
import tempfile
from contextlib import contextmanager

import numpy as np

logger = logging.getLogger(__name__)

SIEVE_MAGIC = b"MDLSIEVE1"
SIEVE_ARRAYS = ('phi', 'd', 'omega', 'spf')


@contextmanager
def atomic_writer(path, mode='w'):
    """
    Context manager for atomic file writes.

    Usage:
        with atomic_writer('reports/coverage.csv') as fh:
            fh.write(...)
    """
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp_path = tempfile.mkstemp(dir=directory, prefix='.tmp-', suffix=os.path.basename(path))
    binary = 'b' in mode
    try:
        with os.fdopen(fd, mode, **({} if binary else {'encoding': 'utf-8', 'newline': ''})) as fh:
            yield fh
        os.replace(tmp_path, path)
    except Exception:
        if os.path.exists(tmp_path):
            os.remove(tmp_path)
        raise


def write_csv(path, header, rows):
    """Write a header row plus rows as UTF-8 CSV with LF line endings."""
    with atomic_writer(path) as fh:
        writer = csv.writer(fh, lineterminator='\n')
        writer.writerow(header)
        for row in rows:
            writer.writerow(row)
    logger.debug("[Storage] wrote %s", path)


def write_json(path, payload):
    """Write a JSON document with sorted keys and a stable layout."""
    with atomic_writer(path) as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write('\n')
    logger.debug("[Storage] wrote %s", path)


def save_sieve(table, path):
    """Serialize a SieveTable to the MDLSIEVE1 binary format."""
    with atomic_writer(path, mode='wb') as fh:
        fh.write(SIEVE_MAGIC)
        fh.write(np.array([table.limit], dtype='<u8').tobytes())
        for name in SIEVE_ARRAYS:
            fh.write(np.ascontiguousarray(getattr(table, name), dtype='<i8').tobytes())
    logger.info("[Storage] sieve cache written to %s (limit %d)", path, table.limit)


def load_sieve(path):
    """
    Load a SieveTable from the MDLSIEVE1 binary format.

    Returns:
        SieveTable, or None if the file does not exist.

    Raises:
        ValueError: If the file is not a valid sieve cache.
    """
    from .arith import SieveTable

    if not os.path.exists(path):
        return None
    with open(path, 'rb') as fh:
        raw = fh.read()
    if not raw.startswith(SIEVE_MAGIC):
        raise ValueError(f"{path}: not a sieve cache (bad magic header)")
    offset = len(SIEVE_MAGIC)
    limit = int(np.frombuffer(raw, dtype='<u8', count=1, offset=offset)[0])
    offset += 8
    size = limit + 1
    if len(raw) != offset + 8 * size * len(SIEVE_ARRAYS):
        raise ValueError(f"{path}: truncated sieve cache")
    arrays = {}
    for name in SIEVE_ARRAYS:
        arrays[name] = np.frombuffer(raw, dtype='<i8', count=size, offset=offset).astype(np.int64)
        offset += 8 * size
    logger.info("[Storage] sieve cache loaded from %s (limit %d)", path, limit)
    return SieveTable.from_arrays(limit, **arrays)
