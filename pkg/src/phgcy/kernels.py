"""Grid kernels, compiled when the extension is available.

``BACKEND`` is ``"cython"`` or ``"numpy"``.  Setting the environment
variable ``PHGCY_PURE_PYTHON=1`` forces the numpy fallback.
"""

import os

from . import _pykernels

if os.environ.get("PHGCY_PURE_PYTHON") == "1":
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:  # extension not built
        _impl = _pykernels

BACKEND = "numpy" if _impl is _pykernels else "cython"

stencil_derivatives = _impl.stencil_derivatives
interval_integrals = _impl.interval_integrals
cumulative_integral = _impl.cumulative_integral
