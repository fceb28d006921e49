"""Kernel backend selection.

The hot loops (per-line tridiagonal solves, entropy-coder bit packing) have
two interchangeable implementations: a compiled extension built from
``_kernels.pyx`` and a pure-numpy fallback in ``_kernels_py``.  The compiled
one is picked at import time when present; set ``STRATA_KERNELS=python`` to
force the fallback (used by the benchmark and the parity tests).  Both
backends produce bit-identical results.
"""

import os

from strata import _kernels_py

try:
    from strata import _kernels as _native
except ImportError:  # extension not built
    _native = None

if os.environ.get("STRATA_KERNELS", "").lower() == "python" or _native is None:
    kernels = _kernels_py
    BACKEND = "python"
else:
    kernels = _native
    BACKEND = "native"


def available_backends():
    """Name -> module map of importable kernel implementations."""
    out = {"python": _kernels_py}
    if _native is not None:
        out["native"] = _native
    return out
