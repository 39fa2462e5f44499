"""Backend selection for the compiled kernels.

numba is used when importable unless ``LAMBDAFLOW_DISABLE_NUMBA`` is set to a
truthy value, in which case the vectorised numpy implementations run instead.
"""
import os

_FALSY = ("", "0", "false", "no", "off")

try:
    import numba  # noqa: F401
    from numba import njit as _njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is an optional extra
    HAVE_NUMBA = False
    _njit = None

NUMBA_DISABLED = os.environ.get("LAMBDAFLOW_DISABLE_NUMBA", "").strip().lower() not in _FALSY
USE_NUMBA = HAVE_NUMBA and not NUMBA_DISABLED


def njit(*args, **kwargs):
    """``numba.njit`` with ``cache=True``; identity decorator without numba."""
    if not HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return _njit(*args, **kwargs)


def backend_name():
    return "numba" if USE_NUMBA else "numpy"
