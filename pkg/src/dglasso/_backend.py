"""Select the compiled or numpy kernels at import time.

Two kernel families exist: the filter/smoother recursions
(``_kalman_ext`` / ``_kalman_py``) and the inner splitting loops
(``_inner_ext`` / ``_inner_py``).

The compiled extension is preferred. Setting ``DGLASSO_BACKEND=python``
forces the numpy fallback; ``DGLASSO_BACKEND=ext`` makes a missing
extension an import error instead of a silent fallback.
"""

from __future__ import annotations

import os

from . import _inner_py, _kalman_py
from .errors import NonSPD

_requested = os.environ.get("DGLASSO_BACKEND", "auto").lower()

_ext = _inner_ext = None
if _requested != "python":
    try:
        from . import _inner_ext, _kalman_ext as _ext
    except ImportError:
        if _requested == "ext":
            raise
        _ext = _inner_ext = None

BACKEND = "ext" if _ext is not None else "python"


def _check(status, what):
    if status != 0:
        raise NonSPD(f"{what} is not positive definite at step {-status}")


def _filter_ext(A, Q, H, R, mu0, Sigma0, Y):
    *out, status = _ext.kalman_filter_arrays(A, Q, H, R, mu0, Sigma0, Y)
    _check(status, "innovation covariance")
    return tuple(out)


def _rts_ext(A, Q, mf, Sf):
    *out, status = _ext.rts_arrays(A, Q, mf, Sf)
    _check(status, "predicted covariance")
    return tuple(out)


def get_kernels(name: str | None = None):
    """Return ``(filter_fn, rts_fn)`` for backend ``name`` (default: active)."""
    name = name or BACKEND
    if name == "python":
        return _kalman_py.kalman_filter_arrays, _kalman_py.rts_arrays
    if name == "ext":
        if _ext is None:
            raise ImportError("compiled kernel dglasso._kalman_ext is not built")
        return _filter_ext, _rts_ext
    raise ValueError(f"unknown backend {name!r}")


def get_inner_kernels(name: str | None = None):
    """Return ``(split_transition, split_precision)`` for backend ``name``."""
    name = name or BACKEND
    if name == "python":
        return _inner_py.split_transition, _inner_py.split_precision
    if name == "ext":
        if _inner_ext is None:
            raise ImportError("compiled kernel dglasso._inner_ext is not built")
        return _inner_ext.split_transition, _inner_ext.split_precision
    raise ValueError(f"unknown backend {name!r}")


def available_backends() -> list[str]:
    return ["python"] + (["ext"] if _ext is not None else [])
