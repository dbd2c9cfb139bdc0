# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled LSTM kernels; mirrors kernels/pyref.py.

Each timestep does one BLAS GEMM across the whole same-length group, with
the gate nonlinearities fused in C loops.
"""

import numpy as np

from libc.math cimport exp, tanh
from scipy.linalg.cython_blas cimport dgemm


cdef inline double _sig(double x) noexcept nogil:
    cdef double e
    if x >= 0.0:
        return 1.0 / (1.0 + exp(-x))
    e = exp(x)
    return e / (1.0 + e)


def lstm_group_forward(double[:, ::1] w, double[::1] b, double[:, :, ::1] x3):
    cdef Py_ssize_t n = x3.shape[0]
    cdef Py_ssize_t l = x3.shape[1]
    cdef Py_ssize_t d = x3.shape[2]
    cdef Py_ssize_t h4 = w.shape[0]
    cdef Py_ssize_t h = h4 // 4
    cdef Py_ssize_t dz = d + h
    cdef Py_ssize_t t, i, j, k

    gates_np = np.empty((n, l, h4))
    cs_np = np.empty((n, l, h))
    tanhcs_np = np.empty((n, l, h))
    hs_np = np.empty((n, l, h))
    h_out_np = np.empty((n, h))
    z_np = np.empty((n, dz))
    pre_np = np.empty((n, h4))

    cdef double[:, :, ::1] gates = gates_np
    cdef double[:, :, ::1] cs = cs_np
    cdef double[:, :, ::1] tanhcs = tanhcs_np
    cdef double[:, :, ::1] hs = hs_np
    cdef double[:, ::1] h_out = h_out_np
    cdef double[:, ::1] z = z_np
    cdef double[:, ::1] pre = pre_np

    cdef int m_i, n_i, k_i, lda, ldb, ldc
    cdef double one = 1.0, zero = 0.0
    cdef double ig, fg, og, gg, c, tc, cp

    with nogil:
        for t in range(l):
            for i in range(n):
                for k in range(d):
                    z[i, k] = x3[i, t, k]
                if t > 0:
                    for j in range(h):
                        z[i, d + j] = hs[i, t - 1, j]
                else:
                    for j in range(h):
                        z[i, d + j] = 0.0
            # pre (n, h4) = z (n, dz) @ w.T; row-major buffers drive the
            # Fortran dgemm through their transposed column-major views
            m_i = <int> h4
            n_i = <int> n
            k_i = <int> dz
            lda = <int> dz
            ldb = <int> dz
            ldc = <int> h4
            dgemm("T", "N", &m_i, &n_i, &k_i, &one, &w[0, 0], &lda,
                  &z[0, 0], &ldb, &zero, &pre[0, 0], &ldc)
            for i in range(n):
                for j in range(h):
                    ig = _sig(pre[i, j] + b[j])
                    fg = _sig(pre[i, h + j] + b[h + j])
                    og = _sig(pre[i, 2 * h + j] + b[2 * h + j])
                    gg = tanh(pre[i, 3 * h + j] + b[3 * h + j])
                    gates[i, t, j] = ig
                    gates[i, t, h + j] = fg
                    gates[i, t, 2 * h + j] = og
                    gates[i, t, 3 * h + j] = gg
                    cp = cs[i, t - 1, j] if t > 0 else 0.0
                    c = fg * cp + ig * gg
                    tc = tanh(c)
                    cs[i, t, j] = c
                    tanhcs[i, t, j] = tc
                    hs[i, t, j] = og * tc
        for i in range(n):
            for j in range(h):
                h_out[i, j] = hs[i, l - 1, j]
    return h_out_np, (gates_np, cs_np, tanhcs_np, hs_np)


def lstm_group_backward(double[:, ::1] w, double[:, :, ::1] x3, caches, dh_out):
    gates_np, cs_np, tanhcs_np, hs_np = caches
    cdef double[:, :, ::1] gates = gates_np
    cdef double[:, :, ::1] cs = cs_np
    cdef double[:, :, ::1] tanhcs = tanhcs_np
    cdef double[:, :, ::1] hs = hs_np

    cdef Py_ssize_t n = x3.shape[0]
    cdef Py_ssize_t l = x3.shape[1]
    cdef Py_ssize_t d = x3.shape[2]
    cdef Py_ssize_t h4 = w.shape[0]
    cdef Py_ssize_t h = h4 // 4
    cdef Py_ssize_t dz = d + h
    cdef Py_ssize_t t, i, j, k

    dw_np = np.zeros((h4, dz))
    db_np = np.zeros(h4)
    dx3_np = np.zeros((n, l, d))
    dh_np = np.array(dh_out, dtype=np.float64)
    dc_np = np.zeros((n, h))
    z_np = np.empty((n, dz))
    dpre_np = np.empty((n, h4))
    zgrad_np = np.empty((n, dz))

    cdef double[:, ::1] dw = dw_np
    cdef double[::1] db = db_np
    cdef double[:, :, ::1] dx3 = dx3_np
    cdef double[:, ::1] dh = dh_np
    cdef double[:, ::1] dc = dc_np
    cdef double[:, ::1] z = z_np
    cdef double[:, ::1] dpre = dpre_np
    cdef double[:, ::1] zgrad = zgrad_np

    cdef int m_i, n_i, k_i, lda, ldb, ldc
    cdef double one = 1.0, zero = 0.0
    cdef double ig, fg, og, gg, tc, cp, do, dcj

    with nogil:
        for t in range(l - 1, -1, -1):
            for i in range(n):
                for j in range(h):
                    ig = gates[i, t, j]
                    fg = gates[i, t, h + j]
                    og = gates[i, t, 2 * h + j]
                    gg = gates[i, t, 3 * h + j]
                    tc = tanhcs[i, t, j]
                    cp = cs[i, t - 1, j] if t > 0 else 0.0
                    do = dh[i, j] * tc
                    dcj = dc[i, j] + dh[i, j] * og * (1.0 - tc * tc)
                    dpre[i, j] = dcj * gg * ig * (1.0 - ig)
                    dpre[i, h + j] = dcj * cp * fg * (1.0 - fg)
                    dpre[i, 2 * h + j] = do * og * (1.0 - og)
                    dpre[i, 3 * h + j] = dcj * ig * (1.0 - gg * gg)
                    dc[i, j] = dcj * fg
                for k in range(d):
                    z[i, k] = x3[i, t, k]
                if t > 0:
                    for j in range(h):
                        z[i, d + j] = hs[i, t - 1, j]
                else:
                    for j in range(h):
                        z[i, d + j] = 0.0
                for j in range(h4):
                    db[j] += dpre[i, j]
            # dw (h4, dz) += dpre.T (h4, n) @ z (n, dz)
            m_i = <int> dz
            n_i = <int> h4
            k_i = <int> n
            lda = <int> dz
            ldb = <int> h4
            ldc = <int> dz
            dgemm("N", "T", &m_i, &n_i, &k_i, &one, &z[0, 0], &lda,
                  &dpre[0, 0], &ldb, &one, &dw[0, 0], &ldc)
            # zgrad (n, dz) = dpre (n, h4) @ w (h4, dz)
            m_i = <int> dz
            n_i = <int> n
            k_i = <int> h4
            lda = <int> dz
            ldb = <int> h4
            ldc = <int> dz
            dgemm("N", "N", &m_i, &n_i, &k_i, &one, &w[0, 0], &lda,
                  &dpre[0, 0], &ldb, &zero, &zgrad[0, 0], &ldc)
            for i in range(n):
                for k in range(d):
                    dx3[i, t, k] = zgrad[i, k]
                for j in range(h):
                    dh[i, j] = zgrad[i, d + j]
    return dw_np, db_np, dx3_np


def lstm_seq_forward(double[:, ::1] w, double[::1] b, double[:, ::1] x):
    x3 = np.ascontiguousarray(np.asarray(x)[None, :, :])
    h_out, caches = lstm_group_forward(w, b, x3)
    return h_out[0], tuple(c[0] for c in caches)


def lstm_seq_backward(double[:, ::1] w, double[:, ::1] x, cache, dh_last):
    x3 = np.ascontiguousarray(np.asarray(x)[None, :, :])
    caches = tuple(np.ascontiguousarray(c[None]) for c in cache)
    dh = np.asarray(dh_last, dtype=np.float64)[None, :]
    dw, db, dx3 = lstm_group_backward(w, x3, caches, dh)
    return dw, db, dx3[0]
