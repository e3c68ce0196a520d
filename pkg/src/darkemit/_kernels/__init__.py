"""Integration backends: compiled Cython kernel with pure-numpy fallback.

The compiled module is preferred; set DARKEMIT_PURE_PYTHON=1 to force the
fallback.  Both expose the same ``Stepper`` class.
"""

from __future__ import annotations

import os

from .common import CompiledSystem, compile_system

if os.environ.get("DARKEMIT_PURE_PYTHON"):
    from . import pyref as _backend
else:
    try:
        from . import _core as _backend  # type: ignore[attr-defined]
    except ImportError:
        from . import pyref as _backend

Stepper = _backend.Stepper
IntegrationError = _backend.IntegrationError
BACKEND_NAME = _backend.BACKEND_NAME


def backend_name() -> str:
    """Name of the active integration backend: 'compiled' or 'python'."""
    return BACKEND_NAME


def get_stepper_class(backend: str | None = None):
    """Stepper class for an explicit backend choice (None = active one)."""
    if backend is None:
        return Stepper
    if backend == "python":
        from . import pyref
        return pyref.Stepper
    if backend == "compiled":
        from . import _core  # raises ImportError if not built
        return _core.Stepper
    raise ValueError(f"unknown backend {backend!r}")


__all__ = [
    "CompiledSystem",
    "compile_system",
    "Stepper",
    "IntegrationError",
    "BACKEND_NAME",
    "backend_name",
    "get_stepper_class",
]
