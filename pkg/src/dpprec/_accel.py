"""Backend selection for the numeric kernels.

Every hot loop in the package exists twice: a loop-style implementation
compiled with ``numba.njit`` and a vectorized pure-numpy fallback. The numba
path is used when numba imports and ``DPPREC_DISABLE_NUMBA`` is unset (or
falsy). Both paths consume random numbers identically, so a seeded run gives
the same sample under either backend.
"""

from __future__ import annotations

import contextlib
import functools
import os

ENV_FLAG = "DPPREC_DISABLE_NUMBA"

try:
    import numba

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a hard dependency in CI
    numba = None
    HAVE_NUMBA = False


def _flag_set() -> bool:
    return os.environ.get(ENV_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


_use_numba = HAVE_NUMBA and not _flag_set()

if HAVE_NUMBA:
    njit = functools.partial(numba.njit, cache=True, nogil=True)
else:  # pragma: no cover

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]
        return lambda f: f


def use_numba() -> bool:
    return _use_numba


def backend() -> str:
    return "numba" if _use_numba else "numpy"


def set_backend(name: str) -> None:
    global _use_numba
    if name not in ("numba", "numpy"):
        raise ValueError(f"unknown backend {name!r}")
    if name == "numba" and not HAVE_NUMBA:
        raise RuntimeError("numba is not installed")
    _use_numba = name == "numba"


@contextlib.contextmanager
def backend_scope(name: str):
    """Temporarily switch backend (used by the benchmark and the tests)."""
    previous = backend()
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)
