"""Kernel backend selection.

The hot forward/backward kernels exist twice: as serial numba-compiled
loops and as chunked pure-numpy BLAS calls.  The active backend is chosen
once per process from the ``QNETLOCAL_BACKEND`` environment variable:
``numba``, ``numpy``, or ``auto`` (the default).  Auto prefers numpy:
the benchmark in benchmarks/bench_backends.py measures the BLAS-backed
path at roughly twice the throughput of the serial numba loops on a
single core, and both backends are exercised by the test suite.
"""

from __future__ import annotations

import os
from types import ModuleType

__all__ = ["get_backend", "backend_name", "available_backends"]

_ENV_VAR = "QNETLOCAL_BACKEND"
_active: ModuleType | None = None
_active_name: str | None = None


def _load(name: str) -> ModuleType:
    if name == "numba":
        from . import _kernels_numba

        return _kernels_numba
    if name == "numpy":
        from . import _kernels_numpy

        return _kernels_numpy
    raise ValueError(f"unknown backend {name!r}; expected 'numba', 'numpy', or 'auto'")


def available_backends() -> list[str]:
    names = ["numpy"]
    try:
        import numba  # noqa: F401

        names.append("numba")
    except ImportError:
        pass
    return names


def get_backend() -> ModuleType:
    """The active kernel module, resolved once and cached."""
    global _active, _active_name
    if _active is None:
        requested = os.environ.get(_ENV_VAR, "auto").strip().lower()
        if requested == "auto":
            requested = "numpy"
        _active = _load(requested)
        _active_name = requested
    return _active


def backend_name() -> str:
    get_backend()
    assert _active_name is not None
    return _active_name
