"""Kernel backend selection.

The compiled extension is used when it was built; otherwise the numpy
fallback. Set ``JUDGERANK_BACKEND=python`` to force the fallback.
"""

import importlib
import logging
import os

logger = logging.getLogger("judgerank")

_MODULES = {"c": "judgerank._ckernels", "python": "judgerank._pykernels"}


def load(name=None):
    """Import a kernel module by backend name (``"c"`` or ``"python"``)."""
    if name not in _MODULES:
        raise ValueError(f"unknown backend {name!r}; expected one of {sorted(_MODULES)}")
    return importlib.import_module(_MODULES[name])


def available():
    names = ["python"]
    try:
        load("c")
    except ImportError:
        pass
    else:
        names.insert(0, "c")
    return names


def _select():
    wanted = os.environ.get("JUDGERANK_BACKEND", "").strip().lower()
    if wanted == "python":
        return "python", load("python")
    try:
        return "c", load("c")
    except ImportError:
        if wanted == "c":
            raise
        logger.debug("compiled kernels unavailable; using numpy fallback")
        return "python", load("python")


BACKEND, kernels = _select()
