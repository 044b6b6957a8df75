"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback. Setting ``NLSQUEEZE_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _fallback

BACKEND = "python"
if os.environ.get("NLSQUEEZE_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl
    except ImportError:
        _impl = _fallback
    else:
        BACKEND = "compiled"
else:
    _impl = _fallback

cost_moments = _impl.cost_moments
moment_amplitudes = _fallback.moment_amplitudes
wigner_grid = _impl.wigner_grid

__all__ = ["BACKEND", "cost_moments", "moment_amplitudes", "wigner_grid"]
