"""Selection between the compiled iteration kernel and the numpy fallback.

The compiled extension is optional: builds without a C toolchain, or with
the environment variable SEAPACK_PURE_PYTHON=1 set, fall back to the numpy
implementation of the same iteration. Both advance the identical scheme;
they differ only in dispatch overhead.
"""

from __future__ import annotations

import os

from .errors import ParameterError

_COMPILED = None
if os.environ.get("SEAPACK_PURE_PYTHON", "") != "1":
    try:
        from . import _kernels as _COMPILED  # type: ignore[no-redef]
    except ImportError:
        _COMPILED = None


def has_compiled() -> bool:
    """True when the compiled kernel module was importable."""
    return _COMPILED is not None


def active_backend() -> str:
    return "compiled" if _COMPILED is not None else "pure"


def get_iterate(backend: str | None = None):
    """Resolve an inner-loop implementation by name.

    backend may be "pure", "compiled", or None for the default (compiled
    when available).
    """
    if backend is None:
        backend = active_backend()
    if backend == "pure":
        from .qp import _iterate_pure
        return _iterate_pure
    if backend == "compiled":
        if _COMPILED is None:
            raise ParameterError(
                "compiled backend requested but the extension is unavailable")
        from .qp import _iterate_compiled
        return _iterate_compiled
    raise ParameterError(f"unknown backend {backend!r}")
