"""
Worker pool sizing.

VQAD_THREADS caps both torch's intra-op threads and the per-tile thread pool.
Results always come back in input order so a single writer can emit files in
manifest order.
"""

import logging
import os
from concurrent.futures import ThreadPoolExecutor

import torch

from io_utils.errors import ConfigurationError

logger = logging.getLogger(__name__)


def worker_count() -> int:
    raw = os.getenv("VQAD_THREADS")
    if raw is None or raw.strip() == "":
        return os.cpu_count() or 1
    try:
        n = int(raw)
    except ValueError:
        raise ConfigurationError(f"VQAD_THREADS must be an integer, got {raw!r}")
    if n < 1:
        raise ConfigurationError(f"VQAD_THREADS must be >= 1, got {n}")
    return n


def configure_torch_threads() -> int:
    n = worker_count()
    torch.set_num_threads(n)
    logger.info(f"torch intra-op threads set to {n}")
    return n


def ordered_map(fn, items, workers=None):
    """
    Apply fn to every item, possibly concurrently, returning results in input order.
    """
    items = list(items)
    workers = workers or worker_count()
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
