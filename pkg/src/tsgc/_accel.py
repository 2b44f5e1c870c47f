"""Optional numba acceleration.

Hot kernels are written once as plain Python over numpy arrays and wrapped
with :func:`jit`.  When numba is importable and ``TSGC_DISABLE_NUMBA`` is not
set, they are compiled in nopython mode; otherwise the undecorated function
runs, and callers that have a vectorised numpy equivalent use that instead.

The flag is read once at import time.
"""

from __future__ import annotations

import os

_FALSEY = {"", "0", "false", "no", "off"}


def _disabled_by_env() -> bool:
    return os.environ.get("TSGC_DISABLE_NUMBA", "").strip().lower() not in _FALSEY


try:
    if _disabled_by_env():
        raise ImportError("numba disabled by TSGC_DISABLE_NUMBA")
    import numba as _numba
except ImportError:
    _numba = None

HAS_NUMBA = _numba is not None


def prange(*args):
    return range(*args)


if HAS_NUMBA:
    prange = _numba.prange  # noqa: F811
    # the system TBB is often too old for numba and only produces a warning
    _numba.config.THREADING_LAYER_PRIORITY = ["omp", "workqueue", "tbb"]


def jit(*args, parallel: bool = False):
    """``numba.njit(cache=True)`` when available, identity otherwise."""

    def wrap(fn):
        if not HAS_NUMBA:
            return fn
        return _numba.njit(cache=True, nogil=True, parallel=parallel)(fn)

    if args and callable(args[0]):
        return wrap(args[0])
    return wrap


def set_threads(n: int | None = None) -> int:
    """Cap kernel parallelism; ``None`` or 0 means all available threads.

    Falls back to ``TSGC_THREADS`` when ``n`` is None. Returns the thread
    count in effect (1 without numba).
    """
    if n is None:
        raw = os.environ.get("TSGC_THREADS", "0").strip() or "0"
        try:
            n = int(raw)
        except ValueError:
            raise ValueError(f"TSGC_THREADS must be an integer, got {raw!r}") from None
    if n < 0:
        raise ValueError("thread count must be >= 0")
    if not HAS_NUMBA:
        return 1
    available = _numba.config.NUMBA_NUM_THREADS
    n = available if n == 0 else min(n, available)
    _numba.set_num_threads(n)
    return n
