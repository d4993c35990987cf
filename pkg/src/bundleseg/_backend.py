"""Kernel backend selection.

The compiled extension is used when it imports; otherwise the numpy
fallback. Setting ``BUNDLESEG_BACKEND=python`` forces the fallback.
"""
import logging
import os

from . import _pykernels

logger = logging.getLogger(__name__)


def load(name=None):
    """Return the kernel module for ``name`` ('cython', 'python' or None for auto)."""
    name = name or os.environ.get("BUNDLESEG_BACKEND", "auto")
    if name == "python":
        return _pykernels
    try:
        from . import _ckernels
    except ImportError:
        if name == "cython":
            raise
        logger.debug("compiled kernels unavailable, using numpy fallback")
        return _pykernels
    return _ckernels


kernels = load()
BACKEND = kernels.NAME
