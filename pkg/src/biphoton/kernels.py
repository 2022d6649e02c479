"""Select the compiled kernels when available, else the numpy fallback.

Set ``BIPHOTON_PURE_PYTHON=1`` to force the fallback.  ``BIPHOTON_THREADS``
caps the worker threads used by the compiled kernels (0 = OpenMP default).
"""
import os

from . import _kernels_py

if os.environ.get("BIPHOTON_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from . import _kernels as _impl
        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"


def thread_count() -> int:
    try:
        return max(int(os.environ.get("BIPHOTON_THREADS", "0")), 0)
    except ValueError:
        return 0


def phase_sums(dk, z, wenv):
    return _impl.phase_sums(dk, z, wenv, thread_count())


def bin_events(pos1, pos2, counts):
    return _impl.bin_events(pos1, pos2, counts)
