"""Optional numba acceleration.

Set ``CONFSPEC_DISABLE_NUMBA=1`` to force the pure-numpy kernels (also used
automatically when numba is not importable). ``CONFSPEC_THREADS`` caps the
number of worker threads used for grid evaluations.
"""

import os

_FALSY = {"", "0", "false", "no", "off"}

try:
    import numba as nb

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    nb = None
    HAVE_NUMBA = False


def numba_enabled():
    flag = os.environ.get("CONFSPEC_DISABLE_NUMBA", "").strip().lower()
    return HAVE_NUMBA and flag in _FALSY


def njit(*args, **kwargs):
    """``numba.njit`` when available, identity decorator otherwise.

    The decorated function is always compiled lazily, so importing the
    package stays cheap even when the numba path is never taken.
    """
    kwargs.setdefault("cache", True)
    kwargs.setdefault("nogil", True)
    if HAVE_NUMBA:
        if args and callable(args[0]):
            return nb.njit(**kwargs)(args[0])
        return nb.njit(*args, **kwargs)
    if args and callable(args[0]):
        return args[0]
    return lambda func: func


def worker_count():
    raw = os.environ.get("CONFSPEC_THREADS", "").strip()
    if not raw:
        return 1
    try:
        n = int(raw)
    except ValueError:
        return 1
    return max(1, min(n, os.cpu_count() or 1))
