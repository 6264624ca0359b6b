"""Import-time selection between the compiled and pure-NumPy kernels.

Set ``DFST_PURE_PYTHON=1`` to force the fallback (used by the benchmark and
by tests that compare the two backends).
"""

import os

_force_pure = os.environ.get("DFST_PURE_PYTHON", "") not in ("", "0")

if _force_pure:
    from . import _kernels_py as _impl

    USING_COMPILED = False
else:
    try:
        from . import _kernels as _impl  # type: ignore[attr-defined]

        USING_COMPILED = True
    except ImportError:
        from . import _kernels_py as _impl

        USING_COMPILED = False

lasso_cd = _impl.lasso_cd
column_sweep = _impl.column_sweep
