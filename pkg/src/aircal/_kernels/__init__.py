"""Kernel backend selection.

Two interchangeable implementations of the training hot loops exist: a
compiled Cython module and a pure-numpy fallback. They are bit-for-bit
equivalent; the compiled one is only faster. The default is the compiled
backend when its import succeeds. Override with the environment variable
AIRCAL_KERNEL=python|cython (checked once, at first import) or by calling
set_backend().
"""

from __future__ import annotations

import os
from types import ModuleType

from aircal.errors import ConfigError

from . import py_backend

try:
    from . import _cyimpl as _cy_backend
except ImportError:
    _cy_backend = None

_BACKENDS: dict[str, ModuleType] = {"python": py_backend}
if _cy_backend is not None:
    _BACKENDS["cython"] = _cy_backend


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def _pick_initial() -> ModuleType:
    forced = os.environ.get("AIRCAL_KERNEL", "").strip()
    if forced:
        if forced not in _BACKENDS:
            raise ConfigError(
                f"AIRCAL_KERNEL={forced!r} is not available; "
                f"choose from {available_backends()}"
            )
        return _BACKENDS[forced]
    return _BACKENDS.get("cython", py_backend)


_active = _pick_initial()


def get_backend() -> ModuleType:
    return _active


def backend_name() -> str:
    return _active.NAME


def set_backend(name: str) -> None:
    global _active
    if name not in _BACKENDS:
        raise ConfigError(
            f"unknown kernel backend {name!r}; choose from {available_backends()}"
        )
    _active = _BACKENDS[name]
