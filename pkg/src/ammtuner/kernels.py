"""Backend selection for the invariant-solver kernels.

The compiled extension is preferred when present; the pure-Python fallback is
used otherwise, or when AMMTUNER_PURE_PYTHON=1 forces it.  ``BACKEND`` names
the active implementation.  General-n solvers are Python-only; the two-token
specializations are the hot path and the only compiled ones.
"""
import os

from ammtuner import _kernels_py
from ammtuner._kernels_py import (  # noqa: F401  (re-exported)
    DEFAULT_MAX_ITER,
    DEFAULT_REL_TOL,
    d_solve_n,
    y_solve_n,
)

if os.environ.get("AMMTUNER_PURE_PYTHON") == "1":
    _impl = _kernels_py
    BACKEND = "python"
else:
    try:
        from ammtuner import _kernels as _impl
        BACKEND = "compiled"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "python"

d_solve2 = _impl.d_solve2
y_solve2 = _impl.y_solve2
