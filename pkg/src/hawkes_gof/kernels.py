"""Backend selection for the hot loops.

The compiled ``_core`` extension is used when importable. Setting the
environment variable ``HAWKES_GOF_PURE_PYTHON=1`` forces the fallback.
"""
import os

if os.environ.get("HAWKES_GOF_PURE_PYTHON", "") not in ("", "0"):
    from . import _pycore as _impl
    BACKEND = "python"
else:
    try:
        from . import _core as _impl
        BACKEND = "cython"
    except ImportError:  # extension not built
        from . import _pycore as _impl
        BACKEND = "python"

hawkes_increments = _impl.hawkes_increments
hawkes_loglik_grad = _impl.hawkes_loglik_grad
hawkes_thin = _impl.hawkes_thin

__all__ = ["BACKEND", "hawkes_increments", "hawkes_loglik_grad", "hawkes_thin"]
