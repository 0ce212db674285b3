"""Backend selection for the fused Gaussian-preset sweeps.

The compiled extension is preferred when it imported successfully;
``LOCALCSMC_BACKEND`` forces a choice ("c" requires the extension,
"py" forces the NumPy fallback, "generic" disables the fused path
entirely so the callback-driven kernels run).  Both fused backends
consume the RNG stream identically, so results are reproducible across
installs with and without a compiler up to floating-point reduction
order.
"""

import os

from . import _fused_np

try:  # pragma: no cover - depends on build environment
    from .. import _core

    HAVE_CORE = True
except ImportError:  # pragma: no cover
    _core = None
    HAVE_CORE = False

_FORCED = None  # test hook; overrides the environment variable


def backend_name():
    forced = _FORCED if _FORCED is not None else os.environ.get("LOCALCSMC_BACKEND", "")
    if forced == "c":
        if not HAVE_CORE:
            raise RuntimeError("compiled backend requested but localcsmc._core is missing")
        return "c"
    if forced == "py":
        return "py"
    if forced == "generic":
        return "generic"
    return "c" if HAVE_CORE else "py"


def fused_module(model):
    """The fused backend to use for this model, or None for the generic
    callback path."""
    if model.gauss is None:
        return None
    name = backend_name()
    if name == "generic":
        return None
    return _core if name == "c" else _fused_np


class force_backend:
    """Context manager pinning the backend; for tests and benchmarks."""

    def __init__(self, name):
        self.name = name
        self._saved = None

    def __enter__(self):
        global _FORCED
        self._saved = _FORCED
        _FORCED = self.name
        return self

    def __exit__(self, *exc):
        global _FORCED
        _FORCED = self._saved
        return False
