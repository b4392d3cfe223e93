"""Select the compiled kernel if it was built, else the numpy fallback.

Set ``RYDQAOA_PURE_PYTHON=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _pykernels

BACKEND = "python"
apply_layers = _pykernels.apply_layers
apply_layers_overlap = _pykernels.apply_layers_overlap
apply_layers_trace = _pykernels.apply_layers_trace

if os.environ.get("RYDQAOA_PURE_PYTHON") != "1":
    try:
        from . import _kernels
    except ImportError:
        pass
    else:
        BACKEND = "cython"
        apply_layers = _kernels.apply_layers
        apply_layers_overlap = _kernels.apply_layers_overlap
        apply_layers_trace = _kernels.apply_layers_trace
