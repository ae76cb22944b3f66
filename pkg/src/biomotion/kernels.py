"""Selects the compiled kernels when available, the numpy ones otherwise.

Set ``BIOMOTION_PURE_PYTHON=1`` to force the numpy fallback.
"""

from __future__ import annotations

import os

from . import _fallback

BACKEND = "numpy"

if os.environ.get("BIOMOTION_PURE_PYTHON", "") not in ("", "0"):
    _impl = _fallback
else:
    try:
        from . import _core as _impl

        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _fallback

hsmd_chain = _impl.hsmd_chain
l4_run = _impl.l4_run

IMPLEMENTATIONS = {"numpy": _fallback}
if BACKEND == "compiled":
    IMPLEMENTATIONS["compiled"] = _impl
