"""Kernel backend selection.

Hot numeric kernels ship in two variants: a numba ``@njit`` build and a plain
numpy build.  The numba build is the default; setting the environment variable
``VRSPLIT_PURE_NUMPY=1`` (before import) selects the numpy fallback, which is
also used automatically when numba is not importable.  Both variants implement
the same arithmetic; results agree to floating-point roundoff but are not
guaranteed bitwise-identical across backends.  Within one backend every kernel
is deterministic.
"""

import os

_TRUTHY = {"1", "true", "yes", "on"}

PURE_NUMPY = os.environ.get("VRSPLIT_PURE_NUMPY", "").strip().lower() in _TRUTHY

if PURE_NUMPY:
    HAVE_NUMBA = False
else:
    try:
        import numba  # noqa: F401

        HAVE_NUMBA = True
    except ImportError:  # pragma: no cover - environment dependent
        HAVE_NUMBA = False

USE_NUMBA = HAVE_NUMBA and not PURE_NUMPY


def backend_name() -> str:
    return "numba" if USE_NUMBA else "numpy"
