"""Backend selection for the hot kernels.

The numeric inner loops in :mod:`pmefront._kernels` exist twice: a numba
``@njit`` version and a pure-numpy fallback.  Selection happens once at
import time from the environment:

    PMEFRONT_NUMBA=1      force numba (ImportError if unavailable)
    PMEFRONT_NUMBA=0      force the pure-numpy path
    unset / "auto"        numba if importable, else numpy

``benchmarks/bench_backends.py`` times the two paths against each other.
"""

import os

_flag = os.environ.get("PMEFRONT_NUMBA", "auto").strip().lower()

if _flag in ("0", "off", "false", "no"):
    NUMBA_ENABLED = False
elif _flag in ("1", "on", "true", "yes"):
    import numba  # noqa: F401  (fail loudly if forced but missing)

    NUMBA_ENABLED = True
else:
    try:
        import numba  # noqa: F401

        NUMBA_ENABLED = True
    except ImportError:
        NUMBA_ENABLED = False


def backend_name():
    return "numba" if NUMBA_ENABLED else "numpy"
