"""Backend selection for the hot kernels.

The compiled extension is used when it imports; set ``UNCAGE_PURE_PYTHON=1``
to force the numpy fallback.
"""
import os

from . import _pykernels

CONTRASTIVE = _pykernels.CONTRASTIVE
POSITIVE_ONLY = _pykernels.POSITIVE_ONLY
NEGATIVE_ONLY = _pykernels.NEGATIVE_ONLY

_impl = _pykernels
BACKEND = "python"
if not os.environ.get("UNCAGE_PURE_PYTHON"):
    try:
        from . import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass

blur_stack = _impl.blur_stack
contrastive = _impl.contrastive
neighbor_votes = _impl.neighbor_votes
halton_order = _impl.halton_order
