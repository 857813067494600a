"""Kernel backend selection.

The compiled extension ``_ckernels`` is used when it imports; otherwise the
pure-Python ``_kernels_py`` module takes over. Set ``TSBAPC_PURE_PYTHON=1``
to force the fallback.
"""
import importlib
import os

_NAMES = (
    "phi_sum",
    "phi_recursion",
    "gamma_sum",
    "ar2_ig_sums",
    "ar2_value_grad",
    "nearest_index",
)


def load_backend(name):
    """Return the kernel module for ``"cython"`` or ``"python"``.

    Raises ImportError if the compiled extension is unavailable.
    """
    if name == "cython":
        return importlib.import_module("tsbapc._ckernels")
    if name == "python":
        return importlib.import_module("tsbapc._kernels_py")
    raise ValueError(f"unknown kernel backend {name!r}")


def available_backends():
    out = ["python"]
    try:
        load_backend("cython")
    except ImportError:
        pass
    else:
        out.insert(0, "cython")
    return out


if os.environ.get("TSBAPC_PURE_PYTHON", "") not in ("", "0"):
    _mod = load_backend("python")
    BACKEND = "python"
else:
    try:
        _mod = load_backend("cython")
        BACKEND = "cython"
    except ImportError:
        _mod = load_backend("python")
        BACKEND = "python"

phi_sum = _mod.phi_sum
phi_recursion = _mod.phi_recursion
gamma_sum = _mod.gamma_sum
ar2_ig_sums = _mod.ar2_ig_sums
ar2_value_grad = _mod.ar2_value_grad
nearest_index = _mod.nearest_index

__all__ = ["BACKEND", "load_backend", "available_backends", *_NAMES]
