# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled versions of the dual projection and greedy association loops."""
import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, INFINITY

cnp.import_array()


def project_rows(Xt, B, r, int max_iter=500, double tol=1e-13):
    cdef double[:, ::1] xt = np.ascontiguousarray(Xt, dtype=np.float64)
    cdef double[:, ::1] b = np.ascontiguousarray(B, dtype=np.float64)
    cdef double[::1] rr = np.ascontiguousarray(r, dtype=np.float64)
    cdef Py_ssize_t K = xt.shape[0], L = xt.shape[1], i, j
    out = np.empty((K, L), dtype=np.float64)
    mu_out = np.zeros(K, dtype=np.float64)
    cdef double[:, ::1] x = out
    cdef double[::1] mu = mu_out
    cdef double m, g, h, bb, v, new, old
    cdef int it, worst = 0
    for i in range(K):
        m = 0.0
        bb = 0.0
        for j in range(L):
            bb += b[i, j] * b[i, j]
        it = 0
        while it < max_iter:
            it += 1
            g = rr[i]
            h = 0.0
            for j in range(L):
                v = xt[i, j] - b[i, j] * m
                if v > 0:
                    g -= b[i, j] * v
                    h += b[i, j] * b[i, j]
            if m == 0.0 and g <= 0.0:
                break
            if h <= 0:
                h = bb
            if h <= 0:
                break
            new = m - g / h
            if new > 0.0:
                new = 0.0
            old = m
            m = new
            if fabs(m - old) <= tol * (fabs(m) if fabs(m) > fabs(old) else fabs(old)):
                break
        if it > worst:
            worst = it
        mu[i] = m
        for j in range(L):
            v = xt[i, j] - b[i, j] * m
            x[i, j] = v if v > 0 else 0.0
    return out, mu_out, worst


def greedy_assign(order, cand, spectral, bandwidth, loads):
    cdef long long[::1] od = np.ascontiguousarray(order, dtype=np.int64)
    cdef cnp.uint8_t[:, ::1] c = np.ascontiguousarray(cand, dtype=np.uint8)
    cdef double[:, ::1] s = np.ascontiguousarray(spectral, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(bandwidth, dtype=np.float64)
    cdef double[::1] k = loads
    cdef Py_ssize_t K = c.shape[0], L = c.shape[1], n, i, j, best
    out_arr = np.full(K, -1, dtype=np.int64)
    cdef long long[::1] out = out_arr
    cdef double sc, top
    for n in range(od.shape[0]):
        i = od[n]
        best = -1
        top = -INFINITY
        for j in range(L):
            if c[i, j]:
                sc = w[j] / (k[j] + 1.0) * s[i, j]
                if sc > top:
                    top = sc
                    best = j
        if best >= 0:
            out[i] = best
            k[best] += 1.0
    return out_arr
