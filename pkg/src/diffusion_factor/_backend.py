"""Select the compiled kernels when available, else the numpy fallback.

Set ``DIFFUSION_FACTOR_PURE=1`` to force the fallback.
"""

import os

if os.environ.get("DIFFUSION_FACTOR_PURE"):
    from . import _kernels_py as kernels
else:
    try:
        from . import _kernels as kernels
    except ImportError:  # extension not built
        from . import _kernels_py as kernels

BACKEND = kernels.BACKEND
