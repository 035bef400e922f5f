"""Kernel backend selection: compiled extension if present, NumPy otherwise.

The compiled module is optional; set QKIT_NO_EXT=1 at build time to skip it
entirely. QKIT_THREADS caps the OpenMP thread count of the compiled sweep
kernel (0 or unset means the OpenMP default).
"""
from __future__ import annotations

import os

if os.environ.get("QKIT_NO_EXT", "").strip() not in ("", "0"):
    from . import _kernels_py as _impl

    HAVE_COMPILED = False
else:
    try:  # pragma: no cover - exercised through whichever backend is built
        from . import _kernels as _impl

        HAVE_COMPILED = True
    except ImportError:  # pragma: no cover
        from . import _kernels_py as _impl

        HAVE_COMPILED = False

from . import _kernels_py as fallback

encode_uniform = _impl.encode_uniform
decode_uniform = _impl.decode_uniform
mse_uniform = _impl.mse_uniform
encode_pwlq = _impl.encode_pwlq
decode_pwlq = _impl.decode_pwlq
accumulate_uniform = _impl.accumulate_uniform
accumulate_pwlq = _impl.accumulate_pwlq


def backend_name():
    return "compiled" if HAVE_COMPILED else "fallback"


def num_threads():
    """Thread cap from QKIT_THREADS; 0 means backend default."""
    raw = os.environ.get("QKIT_THREADS", "").strip()
    if not raw:
        return 0
    n = int(raw)
    if n < 0:
        raise ValueError("QKIT_THREADS must be >= 0")
    return n


def mse_curve_pwlq(a_sorted, m, mag_max, ps):
    """Breakpoint sweep kernel; reads QKIT_THREADS per call."""
    return _impl.mse_curve_pwlq(a_sorted, m, mag_max, ps, num_threads())
