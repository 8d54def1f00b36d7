"""Kernel backend selection.

The compiled ``_kernels`` extension is used when it was built; otherwise the
NumPy fallback is imported. Setting ``IFEF_PURE_PYTHON=1`` forces the fallback.
"""

import os

import numpy as np

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("IFEF_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:  # extension not built
        _impl = _fallback


def _c(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def tanh_forward(Z, n, order):
    """Returns ``(H, T)`` with ``T = tanh(Z[0])`` kept for the backward pass."""
    Z = _c(Z)
    T = np.tanh(Z[0])
    return _impl.tanh_forward(Z, T, n, order), T


def tanh_backward(Z, T, Hb, n, order):
    return _impl.tanh_backward(_c(Z), _c(T), _c(Hb), n, order)


def rff_forward(Y, n, order, scale):
    return _impl.rff_forward(_c(Y), n, order, float(scale))


def rff_backward(Y, CS, Pb, n, order, scale):
    return _impl.rff_backward(_c(Y), _c(CS), _c(Pb), n, order, float(scale))
