# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Fused elementwise jet kernels (compiled). Same contract as ``_fallback``."""

import numpy as np
cimport numpy as cnp
from cython.parallel cimport prange
from libc.math cimport sin, cos

cnp.import_array()


def tanh_forward(double[:, :, ::1] Z, double[:, ::1] T, int n, int order):
    """``T`` is ``tanh(Z[0])``, computed by the caller with NumPy's vectorized tanh."""
    cdef Py_ssize_t C = Z.shape[0], N = Z.shape[1], P = Z.shape[2]
    H_arr = np.empty((C, N, P))
    cdef double[:, :, ::1] H = H_arr
    cdef Py_ssize_t j, k, i
    cdef double t, s, t2, g
    for j in prange(N, nogil=True, schedule="static"):
        for k in range(P):
            t = T[j, k]
            H[0, j, k] = t
            if order >= 1:
                s = 1.0 - t * t
                t2 = -2.0 * t * s
                for i in range(n):
                    g = Z[1 + i, j, k]
                    H[1 + i, j, k] = s * g
                    if order >= 2:
                        H[1 + n + i, j, k] = s * Z[1 + n + i, j, k] + t2 * g * g
    return H_arr


def tanh_backward(double[:, :, ::1] Z, double[:, ::1] T, double[:, :, ::1] Hb,
                  int n, int order):
    cdef Py_ssize_t C = Z.shape[0], N = Z.shape[1], P = Z.shape[2]
    Zb_arr = np.empty((C, N, P))
    cdef double[:, :, ::1] Zb = Zb_arr
    cdef Py_ssize_t j, k, i
    cdef double t, s, t2, t3, g, gb, db, acc
    for j in prange(N, nogil=True, schedule="static"):
        for k in range(P):
            t = T[j, k]
            s = 1.0 - t * t
            t2 = -2.0 * t * s
            t3 = -2.0 * s * (1.0 - 3.0 * t * t)
            acc = Hb[0, j, k] * s
            if order >= 1:
                for i in range(n):
                    g = Z[1 + i, j, k]
                    gb = Hb[1 + i, j, k]
                    acc = acc + gb * t2 * g
                    if order >= 2:
                        db = Hb[1 + n + i, j, k]
                        acc = acc + db * (t2 * Z[1 + n + i, j, k] + t3 * g * g)
                        Zb[1 + i, j, k] = gb * s + 2.0 * t2 * db * g
                        Zb[1 + n + i, j, k] = db * s
                    else:
                        Zb[1 + i, j, k] = gb * s
            Zb[0, j, k] = acc
    return Zb_arr


def rff_forward(double[:, :, ::1] Y, int n, int order, double scale):
    cdef Py_ssize_t C = Y.shape[0], N = Y.shape[1], D = Y.shape[2]
    out_arr = np.empty((C, N, 2 * D))
    cdef double[:, :, ::1] out = out_arr
    cdef Py_ssize_t j, k, i
    cdef double cy, sy, g, dy
    for j in prange(N, nogil=True, schedule="static"):
        for k in range(D):
            cy = cos(Y[0, j, k])
            sy = sin(Y[0, j, k])
            out[0, j, k] = scale * cy
            out[0, j, D + k] = scale * sy
            if order >= 1:
                for i in range(n):
                    g = Y[1 + i, j, k]
                    out[1 + i, j, k] = -scale * sy * g
                    out[1 + i, j, D + k] = scale * cy * g
                    if order >= 2:
                        dy = Y[1 + n + i, j, k]
                        out[1 + n + i, j, k] = -scale * (cy * g * g + sy * dy)
                        out[1 + n + i, j, D + k] = scale * (cy * dy - sy * g * g)
    return out_arr


def rff_backward(double[:, :, ::1] Y, double[:, ::1] CS, double[:, :, ::1] Pb, int n,
                 int order, double scale):
    """``CS`` is the value slice of the forward output, ``scale * [cos Y0, sin Y0]``."""
    cdef Py_ssize_t C = Y.shape[0], N = Y.shape[1], D = Y.shape[2]
    cdef double inv = 1.0 / scale
    Yb_arr = np.empty((C, N, D))
    cdef double[:, :, ::1] Yb = Yb_arr
    cdef Py_ssize_t j, k, i
    cdef double cy, sy, g, dy, ag, bg, ad, bd, acc
    for j in prange(N, nogil=True, schedule="static"):
        for k in range(D):
            cy = CS[j, k] * inv
            sy = CS[j, D + k] * inv
            acc = Pb[0, j, D + k] * cy - Pb[0, j, k] * sy
            if order >= 1:
                for i in range(n):
                    g = Y[1 + i, j, k]
                    ag = Pb[1 + i, j, k]
                    bg = Pb[1 + i, j, D + k]
                    acc = acc - (ag * cy + bg * sy) * g
                    if order >= 2:
                        dy = Y[1 + n + i, j, k]
                        ad = Pb[1 + n + i, j, k]
                        bd = Pb[1 + n + i, j, D + k]
                        acc = acc + ad * (sy * g * g - cy * dy) - bd * (cy * g * g + sy * dy)
                        Yb[1 + i, j, k] = scale * (bg * cy - ag * sy - 2.0 * g * (ad * cy + bd * sy))
                        Yb[1 + n + i, j, k] = scale * (bd * cy - ad * sy)
                    else:
                        Yb[1 + i, j, k] = scale * (bg * cy - ag * sy)
            Yb[0, j, k] = scale * acc
    return Yb_arr
