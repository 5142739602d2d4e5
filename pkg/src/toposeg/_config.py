"""Runtime switches read from the environment.

TOPOSEG_NUMBA   "0"/"false"/"off" forces the pure-numpy kernels (default: numba when importable)
TOPOSEG_THREADS cap on numba worker threads; 0 or unset keeps numba's default
"""
import os

_FALSEY = {"0", "false", "no", "off"}


def numba_requested():
    return os.environ.get("TOPOSEG_NUMBA", "1").strip().lower() not in _FALSEY


def thread_cap():
    raw = os.environ.get("TOPOSEG_THREADS", "").strip()
    if not raw:
        return 0
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"TOPOSEG_THREADS must be an integer, got {raw!r}")
    if n < 0:
        raise ValueError(f"TOPOSEG_THREADS must be >= 0, got {n}")
    return n
