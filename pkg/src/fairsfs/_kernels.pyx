# cython: language_level=3
"""Compiled versions of the kernels in ``_kernels_py``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport log

cnp.import_array()


def g2_from_codes(const long long[:] x, const long long[:] y, const long long[:] z,
                  long long cx, long long cy, long long nz):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i, s, a, b, base
    cdef cnp.ndarray[cnp.int64_t, ndim=1] counts_arr = np.zeros(nz * cx * cy, dtype=np.int64)
    cdef long long[:] counts = counts_arr
    cdef long long[:] rows = np.zeros(cx, dtype=np.int64)
    cdef long long[:] cols = np.zeros(cy, dtype=np.int64)
    cdef long long tot, o, r, c
    cdef double g2 = 0.0
    cdef long long dof = 0

    with nogil:
        for i in range(n):
            counts[(z[i] * cx + x[i]) * cy + y[i]] += 1

        for s in range(nz):
            base = s * cx * cy
            tot = 0
            for a in range(cx):
                rows[a] = 0
            for b in range(cy):
                cols[b] = 0
            for a in range(cx):
                for b in range(cy):
                    o = counts[base + a * cy + b]
                    rows[a] += o
                    cols[b] += o
                    tot += o
            if tot == 0:
                continue
            for a in range(cx):
                if rows[a] == 0:
                    continue
                for b in range(cy):
                    o = counts[base + a * cy + b]
                    if o > 0:
                        g2 += o * log((<double>o * tot) / (<double>rows[a] * cols[b]))
            r = 0
            c = 0
            for a in range(cx):
                if rows[a] > 0:
                    r += 1
            for b in range(cy):
                if cols[b] > 0:
                    c += 1
            dof += (r - 1) * (c - 1)

    g2 *= 2.0
    return (g2 if g2 > 0.0 else 0.0), int(dof)


def knn_predict(const long long[:, :] train, const long long[:] labels,
                const long long[:, :] queries, long long k):
    cdef Py_ssize_t n = train.shape[0]
    cdef Py_ssize_t d = train.shape[1]
    cdef Py_ssize_t m = queries.shape[0]
    cdef Py_ssize_t qi, i, j
    cdef long long thr, cum, need, ones
    cdef cnp.ndarray[cnp.int64_t, ndim=1] out_arr = np.zeros(m, dtype=np.int64)
    cdef long long[:] out = out_arr
    cdef long long[:] dist = np.zeros(n, dtype=np.int64)
    cdef long long[:] hist = np.zeros(d + 1, dtype=np.int64)

    with nogil:
        for qi in range(m):
            for j in range(d + 1):
                hist[j] = 0
            for i in range(n):
                dist[i] = 0
                for j in range(d):
                    if train[i, j] != queries[qi, j]:
                        dist[i] += 1
                hist[dist[i]] += 1
            cum = 0
            thr = 0
            while cum + hist[thr] < k:
                cum += hist[thr]
                thr += 1
            need = k - cum
            ones = 0
            for i in range(n):
                if dist[i] < thr:
                    ones += labels[i]
                elif dist[i] == thr and need > 0:
                    ones += labels[i]
                    need -= 1
            out[qi] = 1 if 2 * ones > k else 0
    return out_arr
