"""Kernel backend selection.

Hot inner loops are written once as plain-Python/numpy functions and
compiled with numba's @njit when available.  Setting the environment
variable SPLITLEVY_BACKEND=numpy forces the uncompiled fallback (useful
for debugging and for the backend benchmark); SPLITLEVY_BACKEND=numba
forces compilation and raises if numba is missing.
"""

import os

_choice = os.environ.get("SPLITLEVY_BACKEND", "auto").lower()

if _choice not in ("auto", "numba", "numpy"):
    raise ValueError(f"SPLITLEVY_BACKEND must be auto|numba|numpy, got {_choice!r}")

if _choice == "numpy":
    HAVE_NUMBA = False
else:
    try:
        import numba as _nb

        HAVE_NUMBA = True
    except ImportError:
        if _choice == "numba":
            raise
        HAVE_NUMBA = False

USING_NUMBA = HAVE_NUMBA and _choice != "numpy"

BACKEND = "numba" if USING_NUMBA else "numpy"


def njit(func):
    """Compile func with numba when the numba backend is active, else return it unchanged."""
    if USING_NUMBA:
        return _nb.njit(cache=True)(func)
    return func
