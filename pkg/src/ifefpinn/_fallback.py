"""Pure-NumPy versions of the elementwise jet kernels.

Jet tensors have shape ``(C, N, m)`` with ``C = 1 + n * order``: component 0 is
the value, components ``1..n`` the first derivatives along each input axis,
components ``n+1..2n`` the per-axis second derivatives.
"""

import numpy as np


def tanh_forward(Z, T, n, order):
    """Push pre-activation jets ``Z`` through tanh; ``T`` is ``tanh(Z[0])``."""
    H = np.empty_like(Z)
    H[0] = T
    if order >= 1:
        S = 1.0 - T * T
        G = Z[1:1 + n]
        H[1:1 + n] = S * G
        if order >= 2:
            T2 = -2.0 * T * S
            H[1 + n:] = S * Z[1 + n:] + T2 * G * G
    return H


def tanh_backward(Z, T, Hb, n, order):
    """Adjoint of :func:`tanh_forward` with respect to ``Z``."""
    Zb = np.empty_like(Z)
    S = 1.0 - T * T
    Zb[0] = Hb[0] * S
    if order >= 1:
        T2 = -2.0 * T * S
        G = Z[1:1 + n]
        Gb = Hb[1:1 + n]
        Zb[0] += T2 * np.einsum("inp,inp->np", Gb, G)
        Zb[1:1 + n] = Gb * S
        if order >= 2:
            T3 = -2.0 * S * (1.0 - 3.0 * T * T)
            Dz = Z[1 + n:]
            Db = Hb[1 + n:]
            Zb[0] += np.einsum("inp,inp->np", Db, T2 * Dz + T3 * G * G)
            Zb[1:1 + n] += 2.0 * T2 * Db * G
            Zb[1 + n:] = Db * S
    return Zb


def rff_forward(Y, n, order, scale):
    """Map projected jets ``Y`` (C, N, D) to ``scale * [cos Y; sin Y]`` jets (C, N, 2D)."""
    C, N, D = Y.shape
    out = np.empty((C, N, 2 * D))
    cy = np.cos(Y[0])
    sy = np.sin(Y[0])
    out[0, :, :D] = scale * cy
    out[0, :, D:] = scale * sy
    if order >= 1:
        G = Y[1:1 + n]
        out[1:1 + n, :, :D] = -scale * sy * G
        out[1:1 + n, :, D:] = scale * cy * G
        if order >= 2:
            G2 = G * G
            Dy = Y[1 + n:]
            out[1 + n:, :, :D] = -scale * (cy * G2 + sy * Dy)
            out[1 + n:, :, D:] = scale * (cy * Dy - sy * G2)
    return out


def rff_backward(Y, CS, Pb, n, order, scale):
    """Adjoint of :func:`rff_forward` w.r.t. ``Y``; ``CS`` is the forward value slice."""
    D = Y.shape[2]
    cy = CS[:, :D] / scale
    sy = CS[:, D:] / scale
    a = Pb[:, :, :D]
    b = Pb[:, :, D:]
    Yb = np.empty_like(Y)
    Yb[0] = b[0] * cy - a[0] * sy
    if order >= 1:
        G = Y[1:1 + n]
        ag, bg = a[1:1 + n], b[1:1 + n]
        Yb[0] -= np.einsum("inp,inp->np", ag * cy + bg * sy, G)
        Yb[1:1 + n] = bg * cy - ag * sy
        if order >= 2:
            Dy = Y[1 + n:]
            ad, bd = a[1 + n:], b[1 + n:]
            G2 = G * G
            Yb[0] += np.einsum("inp,inp->np", ad, sy * G2 - cy * Dy)
            Yb[0] -= np.einsum("inp,inp->np", bd, cy * G2 + sy * Dy)
            Yb[1:1 + n] -= 2.0 * G * (ad * cy + bd * sy)
            Yb[1 + n:] = bd * cy - ad * sy
    Yb *= scale
    return Yb
