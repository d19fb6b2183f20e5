"""Hot-loop kernels with a compiled backend and a pure fallback.

The Cython extension is used when it was built and ``VRDFORGE_PURE_PYTHON``
is unset. Both backends produce identical outputs; ``use_backend`` switches
at runtime (benchmarks and cross-backend tests rely on it).
"""
import os

from . import _kernels_py

try:
    from . import _kernels as _kernels_ext
except ImportError:  # extension not built
    _kernels_ext = None

_BACKENDS = {"python": _kernels_py}
if _kernels_ext is not None:
    _BACKENDS["cython"] = _kernels_ext

_active = _kernels_py


def available_backends():
    return sorted(_BACKENDS)


def backend():
    """Name of the active backend, ``"cython"`` or ``"python"``."""
    return _active.BACKEND


class _Restore:
    def __init__(self, previous):
        self.previous = previous

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        global _active
        _active = self.previous


def use_backend(name):
    """Switch backends; used as a context manager the previous one comes back on exit."""
    global _active
    try:
        new = _BACKENDS[name]
    except KeyError:
        raise ValueError(
            f"backend {name!r} unavailable; have {available_backends()}"
        ) from None
    previous, _active = _active, new
    return _Restore(previous)


def edit_ops(pred, truth):
    return _active.edit_ops(pred, truth)


def convolve_separable(src, weights):
    return _active.convolve_separable(src, weights)


def remap_bilinear(src, map_x, map_y, fill=None):
    return _active.remap_bilinear(src, map_x, map_y, fill)


if _kernels_ext is not None and not os.environ.get("VRDFORGE_PURE_PYTHON"):
    _active = _kernels_ext
