"""Kernel backend selection.

``NCGTV_BACKEND`` chooses the hot-loop implementation:

* ``numba`` - jitted kernels (error if numba is not importable),
* ``numpy`` - pure-numpy fallback,
* ``auto`` or unset - numba when available, numpy otherwise.
"""

import os

_choice = os.environ.get("NCGTV_BACKEND", "auto").strip().lower() or "auto"

if _choice == "numpy":
    from . import _kernels_numpy as kernels

    BACKEND = "numpy"
elif _choice == "numba":
    from . import _kernels_numba as kernels

    BACKEND = "numba"
elif _choice == "auto":
    try:
        from . import _kernels_numba as kernels

        BACKEND = "numba"
    except ImportError:
        from . import _kernels_numpy as kernels

        BACKEND = "numpy"
else:
    raise RuntimeError(
        f"NCGTV_BACKEND={_choice!r} not understood (use 'numba', 'numpy' or 'auto')"
    )


def backend_name():
    """Name of the active kernel backend ('numba' or 'numpy')."""
    return BACKEND
