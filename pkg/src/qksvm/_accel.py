"""Numba shim for the hot statevector kernels.

Importing modules get ``njit``/``prange`` from here. When numba is not
installed, or the env flag ``QKSVM_NUMBA=0`` is set, ``njit`` becomes a
no-op decorator and ``NUMBA_AVAILABLE`` is False, so callers switch to
their vectorized numpy paths instead.
"""

import os


def _numba_wanted() -> bool:
    return os.environ.get("QKSVM_NUMBA", "1").strip().lower() not in ("0", "false", "off")


NUMBA_AVAILABLE = False

if _numba_wanted():
    try:
        from numba import njit, prange  # noqa: F401

        NUMBA_AVAILABLE = True
    except ImportError:  # pragma: no cover - exercised via env flag in tests
        pass

if not NUMBA_AVAILABLE:

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap

    prange = range
