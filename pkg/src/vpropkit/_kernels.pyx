# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot kernels.  Same API as vpropkit._fallback."""

import numpy as np

from libc.math cimport exp, expm1, fabs, log1p, sqrt, M_PI

cdef enum:
    ACT_TANH = 0


cdef inline double _log1pexp(double x) nogil:
    if x > 0.0:
        return x + log1p(exp(-x))
    return log1p(exp(x))


cdef inline double _tanh(double x) nogil:
    # libm tanh is several times slower than expm1 on common platforms
    cdef double e
    if fabs(x) > 20.0:
        return 1.0 if x > 0.0 else -1.0
    e = expm1(2.0 * x)
    return e / (e + 2.0)


cdef inline double _sigmoid(double x) nogil:
    cdef double z
    if x >= 0.0:
        z = exp(-x)
        return 1.0 / (1.0 + z)
    z = exp(x)
    return z / (1.0 + z)


def gh_logsig_moments(m, v, y, nodes, weights):
    cdef const double[::1] mv = np.ascontiguousarray(m, dtype=np.float64)
    cdef const double[::1] vv = np.ascontiguousarray(v, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const double[::1] xq = np.ascontiguousarray(nodes, dtype=np.float64)
    cdef const double[::1] wq = np.ascontiguousarray(weights, dtype=np.float64)
    cdef Py_ssize_t n = mv.shape[0], nq = xq.shape[0], i, q
    value = np.empty(n)
    dm = np.empty(n)
    dv = np.empty(n)
    cdef double[::1] ov = value, om = dm, ow = dv
    cdef double inv_sqrt_pi = 1.0 / sqrt(M_PI)
    cdef double s, yi, z, p, t, w, acc_v, acc_m, acc_w
    with nogil:
        for i in range(n):
            s = sqrt(2.0 * vv[i])
            yi = yv[i]
            acc_v = 0.0
            acc_m = 0.0
            acc_w = 0.0
            for q in range(nq):
                w = wq[q]
                z = yi * (mv[i] + s * xq[q])
                # one exp serves both log(1 + e^-z) and sigmoid(-z)
                t = exp(-fabs(z))
                if z >= 0.0:
                    p = t / (1.0 + t)
                    acc_v = acc_v - w * log1p(t)
                else:
                    p = 1.0 / (1.0 + t)
                    acc_v = acc_v - w * (log1p(t) - z)
                acc_m = acc_m + w * yi * p
                acc_w = acc_w + w * p * (1.0 - p)
            ov[i] = acc_v * inv_sqrt_pi
            om[i] = acc_m * inv_sqrt_pi
            ow[i] = -0.5 * acc_w * inv_sqrt_pi
    return value, dm, dv


def mlp_logits(theta, X, sizes, int act):
    cdef const double[::1] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef const double[:, ::1] xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const long[::1] sz = np.ascontiguousarray(sizes, dtype=np.int64)
    cdef Py_ssize_t nrow = xv.shape[0], nl = sz.shape[0] - 1
    cdef Py_ssize_t total = 0, l
    for l in range(nl + 1):
        total += sz[l]
    scratch = np.empty(total)
    out = np.empty(nrow)
    cdef double[::1] buf = scratch, ov = out
    cdef Py_ssize_t r
    with nogil:
        for r in range(nrow):
            ov[r] = _forward_row(th, xv, r, sz, nl, buf, act)
    return out


cdef double _forward_row(const double[::1] th, const double[:, ::1] xv, Py_ssize_t r,
                         const long[::1] sz, Py_ssize_t nl, double[::1] buf, int act) nogil:
    # buf holds the activations of every layer back to back
    cdef Py_ssize_t l, o, j, n_in, n_out, off = 0, a_in = 0, a_out
    cdef double acc
    for j in range(sz[0]):
        buf[j] = xv[r, j]
    a_out = sz[0]
    for l in range(nl):
        n_in = sz[l]
        n_out = sz[l + 1]
        for o in range(n_out):
            acc = th[off + n_out * n_in + o]
            for j in range(n_in):
                acc = acc + th[off + o * n_in + j] * buf[a_in + j]
            if l < nl - 1 and act == ACT_TANH:
                acc = _tanh(acc)
            buf[a_out + o] = acc
        off += n_out * n_in + n_out
        a_in = a_out
        a_out += n_out
    return buf[a_in]


def mlp_value_grad(theta, X, y, sizes, int act):
    cdef const double[::1] th = np.ascontiguousarray(theta, dtype=np.float64)
    cdef const double[:, ::1] xv = np.ascontiguousarray(X, dtype=np.float64)
    cdef const double[::1] yv = np.ascontiguousarray(y, dtype=np.float64)
    cdef const long[::1] sz = np.ascontiguousarray(sizes, dtype=np.int64)
    cdef Py_ssize_t nrow = xv.shape[0], nl = sz.shape[0] - 1
    cdef Py_ssize_t total = 0, widest = 0, l
    for l in range(nl + 1):
        total += sz[l]
        if sz[l] > widest:
            widest = sz[l]
    lay_off = np.empty(nl, dtype=np.int64)
    act_off = np.empty(nl + 1, dtype=np.int64)
    cdef long[::1] loff = lay_off, aoff = act_off
    cdef Py_ssize_t o = 0
    for l in range(nl):
        loff[l] = o
        o += sz[l + 1] * sz[l] + sz[l + 1]
    o = 0
    for l in range(nl + 1):
        aoff[l] = o
        o += sz[l]
    scratch = np.empty(total)
    d_cur = np.empty(widest)
    d_prev = np.empty(widest)
    grad = np.zeros(th.shape[0])
    cdef double[::1] buf = scratch, dc = d_cur, dp = d_prev, g = grad
    cdef Py_ssize_t r, j, k, n_in, n_out, off, a_in
    cdef double logit, z, value = 0.0, dl, acc, aval
    with nogil:
        for r in range(nrow):
            logit = _forward_row(th, xv, r, sz, nl, buf, act)
            z = yv[r] * logit
            value += _log1pexp(-z)
            dc[0] = -yv[r] * _sigmoid(-z)
            for l in range(nl - 1, -1, -1):
                n_in = sz[l]
                n_out = sz[l + 1]
                off = loff[l]
                a_in = aoff[l]
                for k in range(n_out):
                    dl = dc[k]
                    for j in range(n_in):
                        g[off + k * n_in + j] += dl * buf[a_in + j]
                    g[off + n_out * n_in + k] += dl
                if l > 0:
                    for j in range(n_in):
                        acc = 0.0
                        for k in range(n_out):
                            acc = acc + th[off + k * n_in + j] * dc[k]
                        if act == ACT_TANH:
                            aval = buf[a_in + j]
                            acc = acc * (1.0 - aval * aval)
                        dp[j] = acc
                    for j in range(n_in):
                        dc[j] = dp[j]
    return value, grad
