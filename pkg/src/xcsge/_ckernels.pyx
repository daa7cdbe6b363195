# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``; same signatures."""

import numpy as np
cimport numpy as cnp
from libc.math cimport pow, INFINITY

cnp.import_array()


def knn_mean(ref_X, ref_Y, query_X, Py_ssize_t k, bint exclude_self=False):
    cdef double[:, ::1] X = np.ascontiguousarray(ref_X, dtype=np.float64)
    cdef double[:, ::1] Y = np.ascontiguousarray(ref_Y, dtype=np.float64)
    cdef double[:, ::1] Qx = np.ascontiguousarray(query_X, dtype=np.float64)
    cdef Py_ssize_t n_ref = X.shape[0], n_feat = X.shape[1]
    cdef Py_ssize_t n_q = Qx.shape[0], n_out = Y.shape[1]
    out_arr = np.zeros((n_q, n_out), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double[::1] best_d = np.empty(k, dtype=np.float64)
    cdef Py_ssize_t[::1] best_i = np.empty(k, dtype=np.intp)
    cdef Py_ssize_t q, r, f, i, filled, pos
    cdef double d, diff, acc
    with nogil:
        for q in range(n_q):
            filled = 0
            for r in range(n_ref):
                if exclude_self and r == q:
                    continue
                d = 0.0
                for f in range(n_feat):
                    diff = Qx[q, f] - X[r, f]
                    d = d + diff * diff
                # references arrive in index order, so a strict comparison
                # keeps the lower index on ties
                if filled < k:
                    pos = filled
                    filled = filled + 1
                elif d < best_d[k - 1]:
                    pos = k - 1
                else:
                    continue
                while pos > 0 and best_d[pos - 1] > d:
                    best_d[pos] = best_d[pos - 1]
                    best_i[pos] = best_i[pos - 1]
                    pos = pos - 1
                best_d[pos] = d
                best_i[pos] = r
            for f in range(n_out):
                acc = 0.0
                for i in range(k):
                    acc = acc + Y[best_i[i], f]
                out[q, f] = acc / k
    return out_arr


def fuse(P_in, wg_in, wk_in, Q_in, double eta_local, double epsilon, bint want_weights=False):
    cdef double[:, :, :, ::1] P = np.ascontiguousarray(P_in, dtype=np.float64)
    cdef double[:, ::1] wg = np.ascontiguousarray(wg_in, dtype=np.float64)
    cdef double[:, :, ::1] wk = np.ascontiguousarray(wk_in, dtype=np.float64)
    cdef double[:, :, ::1] Q = np.ascontiguousarray(Q_in, dtype=np.float64)
    cdef Py_ssize_t N = P.shape[0], J = P.shape[1], T = P.shape[2], M = P.shape[3]
    out_arr = np.empty((N, T, M), dtype=np.float64)
    cdef double[:, :, ::1] out = out_arr
    w_arr = np.empty((N if want_weights else 0, T, J, M), dtype=np.float64)
    cdef double[:, :, :, ::1] wout = w_arr
    cdef double[::1] wl = np.empty(J, dtype=np.float64)
    cdef double[::1] wbar = np.empty(J, dtype=np.float64)
    cdef Py_ssize_t n, j, t, m
    cdef double tot, col, acc, w
    with nogil:
        for n in range(N):
            for m in range(M):
                tot = 0.0
                for j in range(J):
                    wl[j] = 1.0 / (pow(Q[n, j, m], eta_local) + epsilon)
                    tot = tot + wl[j]
                if not tot > 0:
                    for j in range(J):
                        wl[j] = 1.0
                    tot = <double>J
                for j in range(J):
                    wl[j] = wl[j] / tot
                for t in range(T):
                    col = 0.0
                    for j in range(J):
                        wbar[j] = wg[j, m] * wl[j] * wk[j, t, m]
                        col = col + wbar[j]
                    if not col > 0:
                        for j in range(J):
                            wbar[j] = 1.0 / J
                        col = 1.0
                    acc = 0.0
                    for j in range(J):
                        w = wbar[j] / col
                        acc = acc + w * P[n, j, t, m]
                        if want_weights:
                            wout[n, t, j, m] = w
                    out[n, t, m] = acc
    return out_arr, (w_arr if want_weights else None)
