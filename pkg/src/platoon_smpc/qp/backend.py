"""Kernel selection for the QP core.

The compiled Cython kernel is preferred when it was built; the pure-Python
twin is the fallback.  Selection happens once at import and can be forced
with the environment variable PLATOON_SMPC_QP_BACKEND (values: "auto",
"python", "compiled") or per call via solve_qp(..., backend=...).
"""

from __future__ import annotations

import os

import numpy as np

from . import _active_set_py

_CORES = {"python": _active_set_py.as_core}
_ACTIVE = "python"

try:
    from . import _active_set_cy

    def _compiled_core(H, f, C, d, x, tol, max_iter):
        return _active_set_cy.as_core(
            np.ascontiguousarray(H), np.ascontiguousarray(f),
            np.ascontiguousarray(C), np.ascontiguousarray(d),
            np.ascontiguousarray(x), tol, max_iter)

    _CORES["compiled"] = _compiled_core
    _ACTIVE = "compiled"
except ImportError:
    pass

_requested = os.environ.get("PLATOON_SMPC_QP_BACKEND", "auto").lower()
if _requested in _CORES:
    _ACTIVE = _requested
elif _requested not in ("auto", ""):
    raise ImportError(
        f"PLATOON_SMPC_QP_BACKEND={_requested!r} is not available; "
        f"built backends: {sorted(_CORES)}")


def available_backends() -> list:
    return sorted(_CORES)


def active_backend() -> str:
    return _ACTIVE


def get_core(name=None):
    if name is None:
        name = _ACTIVE
    if name not in _CORES:
        raise ValueError(f"backend {name!r} not available (built: {sorted(_CORES)})")
    return _CORES[name]
