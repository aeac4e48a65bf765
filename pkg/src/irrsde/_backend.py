"""Selects the simulation kernel backend at import time.

The compiled extension is preferred; the numpy fallback is bitwise equivalent
and used when the extension is unavailable.  Set IRRSDE_BACKEND=python or
IRRSDE_BACKEND=compiled to force a choice (the latter raises if the extension
is missing).
"""

from __future__ import annotations

import os

from . import _kernels_py

_requested = os.environ.get("IRRSDE_BACKEND", "auto").strip().lower()

if _requested in ("auto", ""):
    try:
        from . import _kernels as kernels  # type: ignore[attr-defined]
    except ImportError:
        kernels = _kernels_py
elif _requested in ("compiled", "cython", "c"):
    from . import _kernels as kernels  # type: ignore[attr-defined]
elif _requested in ("python", "py", "fallback"):
    kernels = _kernels_py
else:
    raise ValueError(f"unknown IRRSDE_BACKEND value: {_requested!r}")


def backend_name() -> str:
    return kernels.BACKEND
