"""Kernel backend selection.

The integration kernels exist twice: a numba ``@njit`` build and a pure
numpy build. Which one runs is decided once, at import time, from the
``SWINGCERT_BACKEND`` environment variable:

* ``auto`` (default) -- numba when importable, numpy otherwise
* ``numba``          -- require numba, fail loudly if missing
* ``numpy``          -- force the pure-numpy path

Both paths produce the same trajectories up to floating-point summation
order; ``benchmarks/bench_backends.py`` compares their speed.
"""

from __future__ import annotations

import os

_ENV_VAR = "SWINGCERT_BACKEND"
_VALID = ("auto", "numba", "numpy")


def _resolve() -> str:
    requested = os.environ.get(_ENV_VAR, "auto").strip().lower()
    if requested not in _VALID:
        raise RuntimeError(
            f"{_ENV_VAR}={requested!r} is not valid; expected one of {_VALID}"
        )
    if requested == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if requested == "numba":
            raise RuntimeError(
                f"{_ENV_VAR}=numba but numba is not importable"
            ) from None
        return "numpy"
    return "numba"


_ACTIVE = _resolve()


def active_backend() -> str:
    """Name of the kernel backend chosen at import: 'numba' or 'numpy'."""
    return _ACTIVE


def using_numba() -> bool:
    return _ACTIVE == "numba"
