"""Process-wide runtime knobs.

The harness runs one command per process; the only shared state is the
worker count handed to FFT calls.  Resolution order: explicit set_workers,
then the NLCH_THREADS environment variable, then 1.
"""

from __future__ import annotations

import os

_workers: int | None = None


def set_workers(n: int | None) -> None:
    global _workers
    if n is not None and n < 1:
        raise ValueError(f"worker count must be >= 1, got {n}")
    _workers = n


def get_workers() -> int:
    if _workers is not None:
        return _workers
    env = os.environ.get("NLCH_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            return 1
        if n >= 1:
            return n
    return 1
