"""Backend selection for the numeric hot loops.

The compiled extension is used when it was built; otherwise (or when the
environment variable ``CONDSYM_PURE_PYTHON`` is set to a non-empty value) the
pure-Python module with the same API is used.
"""
from __future__ import annotations

import os

from condsym import _kernels_py

OPCODES = {
    "CONST": 0, "VAR": 1, "ADD": 2, "MUL": 3, "POW": 4, "NEG": 5,
    "INV": 6, "LN": 7, "SQRT": 8, "ABS": 9, "EXP": 10, "IPOW": 11,
}
STATUS = {0: "ok", 1: "log of non-positive value", 2: "sqrt of negative value",
          3: "negative base with fractional exponent", 4: "division by zero", 5: "non-finite value"}

try:
    from condsym import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None

if _compiled is not None and not os.environ.get("CONDSYM_PURE_PYTHON"):
    _impl = _compiled
    BACKEND = "cython"
else:
    _impl = _kernels_py
    BACKEND = "python"

eval_one = _impl.eval_one
eval_batch = _impl.eval_batch
rk4 = _impl.rk4


def available_backends() -> dict:
    """Name -> module for every backend importable in this environment."""
    out = {"python": _kernels_py}
    if _compiled is not None:
        out["cython"] = _compiled
    return out
