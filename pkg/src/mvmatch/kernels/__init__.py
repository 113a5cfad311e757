"""Hot numeric kernels with a numba path and a pure-numpy fallback.

The active backend comes from ``MVMATCH_BACKEND`` (``numba`` or ``numpy``)
at import time and defaults to numba when it is importable.  Within one
backend results are bit-reproducible; across backends they agree to
floating-point rounding only.
"""
from __future__ import annotations

import importlib
import logging
import os
from types import ModuleType

log = logging.getLogger(__name__)

BACKENDS = ("numba", "numpy")

_active: ModuleType
name: str

lstm_forward = lstm_backward = mp_cosine_forward = mp_cosine_backward = None


def load(backend: str) -> ModuleType:
    if backend not in BACKENDS:
        raise ValueError(f"unknown kernel backend {backend!r}; expected one of {BACKENDS}")
    return importlib.import_module(f"{__name__}.{backend}_kernels")


def set_backend(backend: str) -> str:
    """Switch the kernels used by the autodiff ops; returns the backend in effect."""
    global _active, name, lstm_forward, lstm_backward, mp_cosine_forward, mp_cosine_backward
    try:
        mod = load(backend)
    except ImportError:
        if backend != "numba":
            raise
        log.warning("numba unavailable, falling back to numpy kernels")
        backend, mod = "numpy", load("numpy")
    _active, name = mod, backend
    lstm_forward = mod.lstm_forward
    lstm_backward = mod.lstm_backward
    mp_cosine_forward = mod.mp_cosine_forward
    mp_cosine_backward = mod.mp_cosine_backward
    return backend


set_backend(os.environ.get("MVMATCH_BACKEND", "numba").strip().lower() or "numba")
