"""Kernel backend selection.

The compiled extension is used when importable; set ``STOCHBENCH_PURE_PYTHON=1``
to force the reference implementation.
"""
import importlib
import os

from . import _pykernels


def load(name: str | None = None):
    """Return the kernel module for ``"cython"``, ``"python"`` or the default."""
    if name == "python":
        return _pykernels
    if name == "cython":
        return importlib.import_module("stochbench._ckernels")
    if os.environ.get("STOCHBENCH_PURE_PYTHON", "") not in ("", "0"):
        return _pykernels
    try:
        return importlib.import_module("stochbench._ckernels")
    except ImportError:
        return _pykernels


def available() -> list[str]:
    names = ["python"]
    try:
        importlib.import_module("stochbench._ckernels")
    except ImportError:
        return names
    return ["cython", *names]


kernels = load()
BACKEND = kernels.BACKEND
