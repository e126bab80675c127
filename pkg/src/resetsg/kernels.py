"""Select the compiled flow kernel when available, else the pure-Python one.

Set ``RESETSG_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _kernel_py

BACKEND = "python"
flow_segment = _kernel_py.flow_segment

if os.environ.get("RESETSG_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernel  # type: ignore[attr-defined]
    except ImportError:
        pass
    else:
        flow_segment = _kernel.flow_segment
        BACKEND = "cython"

input_value = _kernel_py.input_value
