"""Backend selection for the hot kernels.

Kernels come in two flavours: a numba ``@njit`` version and a pure-numpy
version with the same signature. Set ``QCGAN_DISABLE_JIT=1`` to force the
numpy path (also used automatically when numba is not importable).
``QCGAN_THREADS`` caps the numba thread pool.
"""

from __future__ import annotations

import os

try:
    import numba
    from numba import njit, prange

    HAVE_NUMBA = True
    if "NUMBA_THREADING_LAYER" not in os.environ:
        # skips the TBB probe, which warns on older TBB installs
        numba.config.THREADING_LAYER = "workqueue"
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def decorator(func):
            return func

        return decorator

    prange = range


def _env_flag(name: str) -> bool:
    return os.environ.get(name, "").strip().lower() in {"1", "true", "yes", "on"}


_use_jit = HAVE_NUMBA and not _env_flag("QCGAN_DISABLE_JIT")


def jit_enabled() -> bool:
    return _use_jit


def set_jit(enabled: bool) -> bool:
    """Switch backends at runtime; returns the previous setting."""
    global _use_jit
    previous = _use_jit
    _use_jit = bool(enabled) and HAVE_NUMBA
    return previous


def backend_name() -> str:
    return "numba" if _use_jit else "numpy"


def configure_threads() -> None:
    raw = os.environ.get("QCGAN_THREADS")
    if raw is None or not HAVE_NUMBA:
        return
    try:
        n = int(raw)
    except ValueError:
        from .errors import ConfigurationError

        raise ConfigurationError(f"QCGAN_THREADS must be a positive integer, got {raw!r}")
    if n < 1:
        from .errors import ConfigurationError

        raise ConfigurationError(f"QCGAN_THREADS must be a positive integer, got {raw!r}")
    numba.set_num_threads(min(n, numba.config.NUMBA_NUM_THREADS))
