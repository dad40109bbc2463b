"""Selection between numba-compiled kernels and the numpy fallback.

Set ``MAXLIM_PURE_NUMPY=1`` in the environment to force the numpy path.
The flag is read once at import; tests may flip ``USE_JIT`` directly.
"""
import os

try:
    import numba
    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    numba = None
    HAVE_NUMBA = False


def _env_disabled():
    return os.environ.get("MAXLIM_PURE_NUMPY", "").strip().lower() in {"1", "true", "yes", "on"}


USE_JIT = HAVE_NUMBA and not _env_disabled()


def njit(*args, **kwargs):
    """``numba.njit`` with ``cache=True``, or the identity if numba is missing."""
    if not HAVE_NUMBA:
        if len(args) == 1 and callable(args[0]) and not kwargs:
            return args[0]
        return lambda f: f
    kwargs.setdefault("cache", True)
    return numba.njit(*args, **kwargs)


def backend():
    return "numba" if USE_JIT else "numpy"
