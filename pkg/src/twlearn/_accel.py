"""Numba detection.

Set ``TWLEARN_DISABLE_NUMBA=1`` to force the pure-numpy kernels even when
numba is importable.
"""

import os

_FLAG = os.environ.get("TWLEARN_DISABLE_NUMBA", "").strip().lower()
DISABLED_BY_ENV = _FLAG not in ("", "0", "false", "no")

try:
    import numba  # noqa: F401

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is optional
    HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not DISABLED_BY_ENV


def njit(*args, **kwargs):
    """``numba.njit`` when numba is installed, identity decorator otherwise.

    Kernels are compiled lazily on first call. Compilation happens even when
    USE_NUMBA is False so the benchmark can compare both paths side by side.
    """
    if HAVE_NUMBA:
        import numba

        kwargs.setdefault("cache", True)
        return numba.njit(*args, **kwargs)
    if len(args) == 1 and callable(args[0]) and not kwargs:
        return args[0]
    return lambda f: f
