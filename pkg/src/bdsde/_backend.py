"""Kernel backend selection at import time.

The compiled Cython extension is preferred; the numpy implementation is the
fallback.  Set BDSDE_BACKEND=python to force the fallback or
BDSDE_BACKEND=cython to require the extension (ImportError if missing).
"""

from __future__ import annotations

import os

from . import _kernels_py

_requested = os.environ.get("BDSDE_BACKEND", "").strip().lower()

if _requested in ("python", "py", "fallback"):
    _impl = _kernels_py
    BACKEND = "python"
elif _requested in ("cython", "compiled", "ext"):
    from . import _kernels as _impl  # noqa: F401

    BACKEND = "cython"
else:
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

sweep_implicit = _impl.sweep_implicit
sweep_explicit = _impl.sweep_explicit
sweep_picard = _impl.sweep_picard

tri_offset = _kernels_py.tri_offset
tri_size = _kernels_py.tri_size


def backend_name() -> str:
    """Name of the kernel backend selected at import ('cython' or 'python')."""
    return BACKEND
