# Fused float64 kernels for the training hot path. Semantics mirror
# handcontact._kernels_np; keep both in sync.

import numpy as np

from libc.math cimport exp, fabs, log1p, sqrt

NAME = "cython"


def softmax_rows(x_arr):
    x2 = np.ascontiguousarray(x_arr, dtype=np.float64)
    orig_shape = x2.shape
    x2 = x2.reshape(-1, orig_shape[-1]) if x2.ndim != 2 else x2
    cdef double[:, ::1] x = x2
    cdef Py_ssize_t m = x.shape[0], n = x.shape[1]
    out_arr = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t i, j
    cdef double mx, s
    for i in range(m):
        mx = x[i, 0]
        for j in range(1, n):
            if x[i, j] > mx:
                mx = x[i, j]
        s = 0.0
        for j in range(n):
            out[i, j] = exp(x[i, j] - mx)
            s += out[i, j]
        for j in range(n):
            out[i, j] /= s
    return out_arr.reshape(orig_shape)


def softmax_rows_grad(y_arr, gy_arr):
    y2 = np.ascontiguousarray(y_arr, dtype=np.float64)
    gy2 = np.ascontiguousarray(gy_arr, dtype=np.float64)
    orig_shape = y2.shape
    if y2.ndim != 2:
        y2 = y2.reshape(-1, orig_shape[-1])
        gy2 = gy2.reshape(-1, orig_shape[-1])
    cdef double[:, ::1] y = y2
    cdef double[:, ::1] gy = gy2
    cdef Py_ssize_t m = y.shape[0], n = y.shape[1]
    gx_arr = np.empty((m, n), dtype=np.float64)
    cdef double[:, ::1] gx = gx_arr
    cdef Py_ssize_t i, j
    cdef double dot
    for i in range(m):
        dot = 0.0
        for j in range(n):
            dot += gy[i, j] * y[i, j]
        for j in range(n):
            gx[i, j] = y[i, j] * (gy[i, j] - dot)
    return gx_arr.reshape(orig_shape)


def group_norm_fwd(x_arr, Py_ssize_t groups, gamma_arr, beta_arr, double eps):
    cdef double[:, ::1] x = np.ascontiguousarray(x_arr, dtype=np.float64)
    cdef double[::1] gamma = np.ascontiguousarray(gamma_arr, dtype=np.float64)
    cdef double[::1] beta = np.ascontiguousarray(beta_arr, dtype=np.float64)
    cdef Py_ssize_t n = x.shape[0], d = x.shape[1]
    cdef Py_ssize_t dg = d // groups
    y_arr = np.empty((n, d), dtype=np.float64)
    xhat_arr = np.empty((n, d), dtype=np.float64)
    istd_arr = np.empty(groups, dtype=np.float64)
    mu_arr = np.zeros(d, dtype=np.float64)
    cdef double[:, ::1] y = y_arr
    cdef double[:, ::1] xhat = xhat_arr
    cdef double[::1] istd = istd_arr
    cdef double[::1] mu = mu_arr
    cdef Py_ssize_t i, c, g
    cdef double acc, r, s
    for i in range(n):
        for c in range(d):
            mu[c] += x[i, c]
    for c in range(d):
        mu[c] /= n
    for g in range(groups):
        acc = 0.0
        for i in range(n):
            for c in range(g * dg, (g + 1) * dg):
                r = x[i, c] - mu[c]
                acc += r * r
        istd[g] = 1.0 / sqrt(acc / (n * dg) + eps)
    for g in range(groups):
        s = istd[g]
        for i in range(n):
            for c in range(g * dg, (g + 1) * dg):
                xhat[i, c] = (x[i, c] - mu[c]) * s
                y[i, c] = xhat[i, c] * gamma[c] + beta[c]
    return y_arr, xhat_arr, istd_arr


def group_norm_bwd(gy_arr, xhat_arr, istd_arr, gamma_arr, Py_ssize_t groups):
    cdef double[:, ::1] gy = np.ascontiguousarray(gy_arr, dtype=np.float64)
    cdef double[:, ::1] xhat = np.ascontiguousarray(xhat_arr, dtype=np.float64)
    cdef double[::1] istd = np.ascontiguousarray(istd_arr, dtype=np.float64)
    cdef double[::1] gamma = np.ascontiguousarray(gamma_arr, dtype=np.float64)
    cdef Py_ssize_t n = gy.shape[0], d = gy.shape[1]
    cdef Py_ssize_t dg = d // groups
    gx_arr = np.empty((n, d), dtype=np.float64)
    ggamma_arr = np.zeros(d, dtype=np.float64)
    gbeta_arr = np.zeros(d, dtype=np.float64)
    gr_arr = np.empty((n, d), dtype=np.float64)
    cdef double[:, ::1] gx = gx_arr
    cdef double[::1] ggamma = ggamma_arr
    cdef double[::1] gbeta = gbeta_arr
    cdef double[:, ::1] gr = gr_arr
    cdef Py_ssize_t i, c, g
    cdef double m2, s, gxh, colmean
    for i in range(n):
        for c in range(d):
            gbeta[c] += gy[i, c]
            ggamma[c] += gy[i, c] * xhat[i, c]
    for g in range(groups):
        m2 = 0.0
        for i in range(n):
            for c in range(g * dg, (g + 1) * dg):
                m2 += gy[i, c] * gamma[c] * xhat[i, c]
        m2 /= n * dg
        s = istd[g]
        for i in range(n):
            for c in range(g * dg, (g + 1) * dg):
                gxh = gy[i, c] * gamma[c]
                gr[i, c] = (gxh - xhat[i, c] * m2) * s
    for c in range(d):
        colmean = 0.0
        for i in range(n):
            colmean += gr[i, c]
        colmean /= n
        for i in range(n):
            gx[i, c] = gr[i, c] - colmean
    return gx_arr, ggamma_arr, gbeta_arr


cdef inline double _sigmoid(double v) noexcept nogil:
    cdef double e
    if v >= 0.0:
        return 1.0 / (1.0 + exp(-v))
    e = exp(v)
    return e / (1.0 + e)


def sigmoid(x_arr):
    shape = np.shape(x_arr)
    cdef double[::1] x = np.ascontiguousarray(x_arr, dtype=np.float64).reshape(-1)
    out_arr = np.empty(x.shape[0], dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        out[i] = _sigmoid(x[i])
    return out_arr.reshape(shape)


def sigmoid_grad(y_arr, gy_arr):
    shape = np.shape(y_arr)
    cdef double[::1] y = np.ascontiguousarray(y_arr, dtype=np.float64).reshape(-1)
    cdef double[::1] gy = np.ascontiguousarray(gy_arr, dtype=np.float64).reshape(-1)
    out_arr = np.empty(y.shape[0], dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    for i in range(y.shape[0]):
        out[i] = gy[i] * y[i] * (1.0 - y[i])
    return out_arr.reshape(shape)


def relu(x_arr):
    shape = np.shape(x_arr)
    cdef double[::1] x = np.ascontiguousarray(x_arr, dtype=np.float64).reshape(-1)
    out_arr = np.empty(x.shape[0], dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        out[i] = x[i] if x[i] > 0.0 else 0.0
    return out_arr.reshape(shape)


def relu_grad(x_arr, gy_arr):
    shape = np.shape(x_arr)
    cdef double[::1] x = np.ascontiguousarray(x_arr, dtype=np.float64).reshape(-1)
    cdef double[::1] gy = np.ascontiguousarray(gy_arr, dtype=np.float64).reshape(-1)
    out_arr = np.empty(x.shape[0], dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        out[i] = gy[i] if x[i] > 0.0 else 0.0
    return out_arr.reshape(shape)


def bce_logits(x_arr, t_arr, mask_arr):
    cdef double[::1] x = np.ascontiguousarray(x_arr, dtype=np.float64).reshape(-1)
    cdef double[::1] t = np.ascontiguousarray(t_arr, dtype=np.float64).reshape(-1)
    cdef double[::1] mask = np.ascontiguousarray(mask_arr, dtype=np.float64).reshape(-1)
    cdef Py_ssize_t i
    cdef double total = 0.0, v
    for i in range(x.shape[0]):
        v = x[i]
        total += ((v if v > 0.0 else 0.0) - v * t[i] + log1p(exp(-fabs(v)))) * mask[i]
    return total


def bce_logits_grad(x_arr, t_arr, mask_arr):
    shape = np.shape(x_arr)
    cdef double[::1] x = np.ascontiguousarray(x_arr, dtype=np.float64).reshape(-1)
    cdef double[::1] t = np.ascontiguousarray(t_arr, dtype=np.float64).reshape(-1)
    cdef double[::1] mask = np.ascontiguousarray(mask_arr, dtype=np.float64).reshape(-1)
    out_arr = np.empty(x.shape[0], dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i
    for i in range(x.shape[0]):
        out[i] = (_sigmoid(x[i]) - t[i]) * mask[i]
    return out_arr.reshape(shape)
