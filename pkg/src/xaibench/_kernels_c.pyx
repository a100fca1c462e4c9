# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the conv/pool hot loops.

Signature-compatible with ``_kernels_np``; selected at import by the
``kernels`` dispatcher when available.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


def conv2d_forward(cnp.float64_t[:, :, ::1] x,
                   cnp.float64_t[:, :, :, ::1] weights,
                   cnp.float64_t[::1] bias,
                   Py_ssize_t sh, Py_ssize_t sw):
    cdef Py_ssize_t h = x.shape[0], w = x.shape[1], cin = x.shape[2]
    cdef Py_ssize_t kh = weights.shape[0], kw = weights.shape[1]
    cdef Py_ssize_t cout = weights.shape[3]
    cdef Py_ssize_t oh = (h - kh) // sh + 1
    cdef Py_ssize_t ow = (w - kw) // sw + 1
    out_arr = np.empty((oh, ow, cout), dtype=np.float64)
    cdef cnp.float64_t[:, :, ::1] out = out_arr
    cdef Py_ssize_t i, j, o, ky, kx, ci
    cdef double acc
    for i in range(oh):
        for j in range(ow):
            for o in range(cout):
                acc = bias[o]
                for ky in range(kh):
                    for kx in range(kw):
                        for ci in range(cin):
                            acc += x[i * sh + ky, j * sw + kx, ci] * weights[ky, kx, ci, o]
                out[i, j, o] = acc
    return out_arr


def conv2d_backward_input(cnp.float64_t[:, :, ::1] grad,
                          cnp.float64_t[:, :, :, ::1] weights,
                          Py_ssize_t sh, Py_ssize_t sw,
                          Py_ssize_t h, Py_ssize_t w):
    cdef Py_ssize_t oh = grad.shape[0], ow = grad.shape[1], cout = grad.shape[2]
    cdef Py_ssize_t kh = weights.shape[0], kw = weights.shape[1], cin = weights.shape[2]
    dx_arr = np.zeros((h, w, cin), dtype=np.float64)
    cdef cnp.float64_t[:, :, ::1] dx = dx_arr
    cdef Py_ssize_t i, j, o, ky, kx, ci
    cdef double g
    for i in range(oh):
        for j in range(ow):
            for o in range(cout):
                g = grad[i, j, o]
                if g == 0.0:
                    continue
                for ky in range(kh):
                    for kx in range(kw):
                        for ci in range(cin):
                            dx[i * sh + ky, j * sw + kx, ci] += g * weights[ky, kx, ci, o]
    return dx_arr


def maxpool_forward(cnp.float64_t[:, :, ::1] x,
                    Py_ssize_t kh, Py_ssize_t kw,
                    Py_ssize_t sh, Py_ssize_t sw):
    cdef Py_ssize_t h = x.shape[0], w = x.shape[1], c = x.shape[2]
    cdef Py_ssize_t oh = (h - kh) // sh + 1
    cdef Py_ssize_t ow = (w - kw) // sw + 1
    out_arr = np.empty((oh, ow, c), dtype=np.float64)
    arg_arr = np.empty((oh, ow, c), dtype=np.int64)
    cdef cnp.float64_t[:, :, ::1] out = out_arr
    cdef cnp.int64_t[:, :, ::1] argmax = arg_arr
    cdef Py_ssize_t i, j, ch, ky, kx, by, bx
    cdef double best, v
    cdef Py_ssize_t bidx
    for i in range(oh):
        for j in range(ow):
            for ch in range(c):
                best = x[i * sh, j * sw, ch]
                bidx = (i * sh) * w + (j * sw)
                for ky in range(kh):
                    for kx in range(kw):
                        v = x[i * sh + ky, j * sw + kx, ch]
                        if v > best:
                            best = v
                            bidx = (i * sh + ky) * w + (j * sw + kx)
                out[i, j, ch] = best
                argmax[i, j, ch] = bidx
    return out_arr, arg_arr


def maxpool_backward(cnp.float64_t[:, :, ::1] grad,
                     cnp.int64_t[:, :, ::1] argmax,
                     Py_ssize_t h, Py_ssize_t w):
    cdef Py_ssize_t oh = grad.shape[0], ow = grad.shape[1], c = grad.shape[2]
    dx_arr = np.zeros((h, w, c), dtype=np.float64)
    cdef cnp.float64_t[:, :, ::1] dx = dx_arr
    cdef Py_ssize_t i, j, ch, flat
    for i in range(oh):
        for j in range(ow):
            for ch in range(c):
                flat = argmax[i, j, ch]
                dx[flat // w, flat % w, ch] += grad[i, j, ch]
    return dx_arr
