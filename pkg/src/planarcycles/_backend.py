"""Pick the integration kernel at import time.

The compiled ``_kernel`` is used when it was built; set
``PLANARCYCLES_BACKEND=python`` to force the pure-Python fallback.
"""
import os

from . import _kernel_py

if os.environ.get("PLANARCYCLES_BACKEND", "").lower() == "python":
    kernel = _kernel_py
    NAME = "python"
else:
    try:
        from . import _kernel as kernel
        NAME = "cython"
    except ImportError:
        kernel = _kernel_py
        NAME = "python"
