"""Kernel backend selection, fixed at import time.

Prefers the compiled extension and falls back to the numpy implementation
when the extension was not built.  ``SALESFOREST_FORCE_FALLBACK=1`` forces
the numpy path (used by the parity tests and the backend benchmark).
Both backends produce bit-identical models and predictions.
"""

from __future__ import annotations

import os

from . import _kernel_py

if os.environ.get("SALESFOREST_FORCE_FALLBACK"):
    kernel = _kernel_py
else:
    try:
        from . import _kernel as kernel  # type: ignore[no-redef]
    except ImportError:
        kernel = _kernel_py


def backend_name() -> str:
    """'compiled' when the extension is active, else 'python'."""
    return kernel.BACKEND


def available_kernels() -> dict:
    """All importable kernel modules, keyed by backend name."""
    kernels = {_kernel_py.BACKEND: _kernel_py}
    try:
        from . import _kernel
        kernels[_kernel.BACKEND] = _kernel
    except ImportError:
        pass
    return kernels
