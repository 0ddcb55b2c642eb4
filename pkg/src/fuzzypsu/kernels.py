"""Kernel dispatch: the compiled extension when importable, else pure Python.

Set FPSU_PURE_PYTHON=1 to force the fallback.
"""

import os

from fuzzypsu import _kernels_py as python_impl

compiled_impl = None
if os.environ.get("FPSU_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from fuzzypsu import _kernels as compiled_impl  # type: ignore[no-redef]
    except ImportError:
        compiled_impl = None

_impl = compiled_impl or python_impl
BACKEND = "cython" if compiled_impl is not None else "python"

peel_order = _impl.peel_order
bucket_candidates = _impl.bucket_candidates
splitmix64 = _impl.splitmix64
