"""Kernel backend selection.

The compiled extension is used when it imports; ``CSIRL_BACKEND=python``
forces the numpy fallback and ``CSIRL_BACKEND=cython`` makes a missing
extension an error.
"""
import os

from . import _pykernels

_choice = os.environ.get("CSIRL_BACKEND", "auto").lower()

if _choice == "python":
    kernels = _pykernels
else:
    try:
        from . import _ckernels as kernels
    except ImportError:
        if _choice == "cython":
            raise
        kernels = _pykernels

NAME = kernels.NAME
