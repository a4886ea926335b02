"""Backend selection for the CSS kernels.

The compiled module is used when importable; ``GROUPCAST_PURE_PYTHON=1``
forces the fallback. Both expose ``is_stable``, ``css_residuals``,
``css_objective`` and ``fit_css`` with identical signatures.
"""

import os

from ._pykernels import ar_polynomial, ma_polynomial

if os.environ.get("GROUPCAST_PURE_PYTHON", "") not in ("", "0"):
    from . import _pykernels as _impl
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        from . import _pykernels as _impl

BACKEND = _impl.BACKEND
is_stable = _impl.is_stable
css_residuals = _impl.css_residuals
css_objective = _impl.css_objective
fit_css = _impl.fit_css

__all__ = [
    "BACKEND",
    "ar_polynomial",
    "ma_polynomial",
    "is_stable",
    "css_residuals",
    "css_objective",
    "fit_css",
]
