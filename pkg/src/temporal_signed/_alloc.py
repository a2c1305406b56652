"""glibc allocator tuning for autodiff-heavy workloads.

Each training step allocates and frees many megabyte-sized temporaries.
With default settings glibc serves them through fresh mmap calls or trims
the heap after every free, so every step pays page faults that grow with
the array size. Raising the mmap and trim thresholds keeps that memory in
the heap. Disabled with ``TEMPORAL_SIGNED_MALLOC_TUNING=0``.
"""

from __future__ import annotations

import ctypes
import ctypes.util
import os
import sys

_M_TRIM_THRESHOLD = -1
_M_MMAP_THRESHOLD = -3
_MMAP_MAX_THRESHOLD = 32 * 1024 * 1024
_TRIM_THRESHOLD = 1 << 30

_applied = None


def tune_allocator() -> bool:
    """Apply the thresholds once; returns True when glibc accepted them."""
    global _applied
    if _applied is not None:
        return _applied
    _applied = False
    if os.environ.get("TEMPORAL_SIGNED_MALLOC_TUNING", "1").lower() in ("0", "false", "no", "off"):
        return False
    if not sys.platform.startswith("linux"):
        return False
    try:
        libc = ctypes.CDLL(ctypes.util.find_library("c") or "libc.so.6")
        mallopt = libc.mallopt
    except (OSError, AttributeError):
        return False
    mallopt.argtypes = [ctypes.c_int, ctypes.c_int]
    ok = mallopt(_M_MMAP_THRESHOLD, _MMAP_MAX_THRESHOLD) == 1
    ok = mallopt(_M_TRIM_THRESHOLD, _TRIM_THRESHOLD) == 1 and ok
    _applied = ok
    return ok
