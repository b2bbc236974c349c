"""Kernel backend selection.

The compiled extension is preferred; the numpy fallback implements the same
algorithms and is selected when the extension is missing or when the
environment variable ``SUBGRAPE_PURE_PYTHON`` is set (useful for
benchmarking the two against each other).
"""

import os
from contextlib import contextmanager

from . import _fallback

if os.environ.get("SUBGRAPE_PURE_PYTHON"):
    _backend = _fallback
else:
    try:
        from . import _core as _backend
    except ImportError:
        _backend = _fallback

BACKEND = _backend.BACKEND

# Optional witness for the largest matrix dimension entering the kernels;
# used to assert that subsystem-scale runs never touch full-system matrices.
_dim_watch = None


class DimensionLog:
    def __init__(self):
        self.max_dim = 0

    def see(self, dim):
        if dim > self.max_dim:
            self.max_dim = dim


@contextmanager
def record_dims():
    """Record the largest kernel matrix dimension within the block."""
    global _dim_watch
    prev, _dim_watch = _dim_watch, DimensionLog()
    try:
        yield _dim_watch
    finally:
        _dim_watch = prev


def expm(a):
    if _dim_watch is not None:
        _dim_watch.see(a.shape[0])
    return _backend.expm(a)


def propagate_slices(h_static, ops, amps, tau):
    if _dim_watch is not None:
        _dim_watch.see(h_static.shape[0])
    return _backend.propagate_slices(h_static, ops, amps, tau)


def cumulative_left(slices):
    if _dim_watch is not None:
        _dim_watch.see(slices.shape[1])
    return _backend.cumulative_left(slices)


def available_backends():
    """Name -> module for every importable backend (for benchmarks/tests)."""
    found = {"fallback": _fallback}
    try:
        from . import _core
        found["compiled"] = _core
    except ImportError:
        pass
    return found
