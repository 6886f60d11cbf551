"""Kernel backend selection.

The compiled extension (handcontact._speedups) is preferred when importable;
otherwise the NumPy kernels are used. HANDCONTACT_NO_EXT=1 forces the NumPy
fallback, which is also how the parity tests and the benchmark pin a backend.
"""

import os

from . import _kernels_np

if os.environ.get("HANDCONTACT_NO_EXT", "") not in ("", "0"):
    kernels = _kernels_np
else:
    try:
        from . import _speedups as kernels  # type: ignore[no-redef]
    except ImportError:
        kernels = _kernels_np


def backend_name() -> str:
    """Name of the active kernel backend: "cython" or "numpy"."""
    return kernels.NAME
