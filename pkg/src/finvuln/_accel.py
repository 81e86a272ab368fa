"""Numba acceleration switch.

Hot kernels in :mod:`finvuln.kernels` ship in two variants: a numba
``@njit`` loop version and a vectorized pure-numpy version.  The numba
path is used when numba imports cleanly and the environment variable
``FINVULN_DISABLE_NUMBA`` is unset (or "0").  Set it to "1" to force the
numpy fallback, e.g. for debugging or on platforms without a working
LLVM toolchain.
"""

import os

_DISABLED = os.environ.get("FINVULN_DISABLE_NUMBA", "0").lower() in ("1", "true", "yes")

if not _DISABLED:
    try:
        from numba import njit, prange

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - exercised via env flag instead
        HAVE_NUMBA = False
else:
    HAVE_NUMBA = False

if not HAVE_NUMBA:

    def njit(*args, **kwargs):  # noqa: D103 - decorator stub, numba absent
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap

    prange = range
