"""Optional numba acceleration.

The hot per-step kernels are written once and compiled with numba when it is
importable.  Setting the environment variable FQL_EMS_NUMBA=0 (or numba being
absent) selects a pure-Python fallback: the decorator below degrades to an
identity wrapper and the same source runs uncompiled.  Both paths are
bit-for-bit equivalent; see scripts/benchmark.py for the speed comparison.
"""
import os


def _jit_wanted() -> bool:
    val = os.environ.get("FQL_EMS_NUMBA", "1").strip().lower()
    return val not in ("0", "false", "no", "off")


USING_NUMBA = False

if _jit_wanted():
    try:
        from numba import njit  # noqa: F401
        USING_NUMBA = True
    except ImportError:
        pass

if not USING_NUMBA:
    def njit(*args, **kwargs):
        # mirrors numba's dual calling convention: @njit and @njit(...)
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]

        def _decorator(func):
            return func
        return _decorator
