"""Q-network numeric kernels: compiled core with a NumPy fallback.

The compiled extension is preferred when present; set FEDSLEEP_PURE_PYTHON=1
to force the NumPy path (used by the backend benchmark and tests).
"""

import os

if os.environ.get("FEDSLEEP_PURE_PYTHON", "0") not in ("", "0"):
    from .fallback import mlp_forward, td_sgd_step

    BACKEND = "numpy"
else:
    try:
        from ._core import mlp_forward, td_sgd_step

        BACKEND = "cython"
    except ImportError:
        from .fallback import mlp_forward, td_sgd_step

        BACKEND = "numpy"

__all__ = ["mlp_forward", "td_sgd_step", "BACKEND"]
