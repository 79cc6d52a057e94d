"""Kernel backend selection.

The compiled ``_core`` extension is used when it imports; otherwise the numpy
implementations in ``_kernels_py`` take over. Setting ``VALUEPRIOR_PURE_PYTHON=1``
forces the fallback.
"""

import os

from valueprior import _kernels_py

if os.environ.get("VALUEPRIOR_PURE_PYTHON", "") not in ("", "0"):
    _impl = _kernels_py
else:
    try:
        from valueprior import _core as _impl
    except ImportError:  # extension not built
        _impl = _kernels_py

BACKEND = "compiled" if _impl is not _kernels_py else "python"

propagate = _impl.propagate
expected_next = _impl.expected_next
backup = _impl.backup
simplex_solve = _impl.simplex_solve


def available_backends():
    """Map backend name to kernel module for every backend that imports."""
    found = {"python": _kernels_py}
    try:
        from valueprior import _core
    except ImportError:
        pass
    else:
        found["compiled"] = _core
    return found
