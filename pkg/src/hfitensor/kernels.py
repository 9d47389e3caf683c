"""Backend selection for the voxel kernels.

The compiled extension is used when importable; set ``HFITENSOR_PURE_PYTHON=1``
to force the numpy fallback.
"""
import os

from . import _pykernels as python_backend

compiled_backend = None
if not os.environ.get("HFITENSOR_PURE_PYTHON"):
    try:
        from . import _ckernels as compiled_backend
    except ImportError:
        compiled_backend = None

impl = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

dipolar_slab = impl.dipolar_slab
trilinear = impl.trilinear
