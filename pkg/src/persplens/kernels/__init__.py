"""Hot numerical kernels: compiled core with a pure-NumPy fallback.

The Cython extension ``_ckernels`` is preferred when it was built; otherwise
``_pykernels`` provides the same functions in vectorized NumPy. Set
``PERSPLENS_KERNELS=python`` or ``=compiled`` to force a backend.
"""

from __future__ import annotations

import os

from . import _pykernels

_forced = os.environ.get("PERSPLENS_KERNELS", "").strip().lower()

if _forced == "python":
    _impl = _pykernels
    BACKEND = "python"
else:
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        if _forced == "compiled":
            raise ImportError(
                "PERSPLENS_KERNELS=compiled but the extension is not built; "
                "run `python setup.py build_ext --inplace` or reinstall"
            ) from None
        _impl = _pykernels
        BACKEND = "python"

sobel_planes = _impl.sobel_planes
sobel_planes_adjoint = _impl.sobel_planes_adjoint
bilinear_gather = _impl.bilinear_gather
profile_accumulate = _impl.profile_accumulate
profile_scatter = _impl.profile_scatter

__all__ = [
    "BACKEND",
    "bilinear_gather",
    "profile_accumulate",
    "profile_scatter",
    "sobel_planes",
    "sobel_planes_adjoint",
]
