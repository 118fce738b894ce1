# cython: language_level=3
"""Compiled per-point passes over a dataset.

Every pass is a single sweep over the points with K small; each returns
plain sums so callers can form means and ML estimates. Signatures and
semantics match ``_kernels_py``.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, INFINITY

cnp.import_array()

cdef double LN2 = 0.6931471805599453
cdef double LN_SQRT_2PI = 0.9189385332046727


def wta_pass(const double[::1] x, const double[::1] mu, const double[::1] sigma,
             const double[::1] log_alpha):
    cdef Py_ssize_t n = x.shape[0], k = mu.shape[0], i, b, best
    cdef double xi, z, s, best_s, best_lp, lp, d
    cdef double total = 0.0
    labels_arr = np.empty(n, dtype=np.int64)
    counts_arr = np.zeros(k, dtype=np.int64)
    s1_arr = np.zeros(k)
    s2_arr = np.zeros(k)
    cdef long long[::1] labels = labels_arr
    cdef long long[::1] counts = counts_arr
    cdef double[::1] s1 = s1_arr
    cdef double[::1] s2 = s2_arr
    cdef double[::1] lsig = np.log(np.asarray(sigma))
    with nogil:
        for i in range(n):
            xi = x[i]
            best = 0
            best_s = -INFINITY
            best_lp = 0.0
            for b in range(k):
                z = (xi - mu[b]) / sigma[b]
                lp = -0.5 * z * z - lsig[b] - LN_SQRT_2PI
                s = log_alpha[b] + lp
                if s > best_s:
                    best_s = s
                    best = b
                    best_lp = lp
            labels[i] = best
            counts[best] += 1
            d = xi - mu[best]
            s1[best] += d
            s2[best] += d * d
            total -= best_lp
    return labels_arr, counts_arr, s1_arr, s2_arr, total / LN2


def soft_pass(const double[::1] x, const double[::1] mu, const double[::1] sigma,
              const double[::1] log_alpha):
    cdef Py_ssize_t n = x.shape[0], k = mu.shape[0], i, b
    cdef double xi, z, m, acc, lse, r, d
    cdef double total = 0.0
    rsum_arr = np.zeros(k)
    s1_arr = np.zeros(k)
    s2_arr = np.zeros(k)
    cdef double[::1] rsum = rsum_arr
    cdef double[::1] s1 = s1_arr
    cdef double[::1] s2 = s2_arr
    cdef double[::1] lsig = np.log(np.asarray(sigma))
    cdef double[::1] s = np.empty(k)
    with nogil:
        for i in range(n):
            xi = x[i]
            m = -INFINITY
            for b in range(k):
                z = (xi - mu[b]) / sigma[b]
                s[b] = log_alpha[b] - 0.5 * z * z - lsig[b] - LN_SQRT_2PI
                if s[b] > m:
                    m = s[b]
            acc = 0.0
            for b in range(k):
                acc += exp(s[b] - m)
            lse = m + log(acc)
            total -= lse
            for b in range(k):
                r = exp(s[b] - lse)
                d = xi - mu[b]
                rsum[b] += r
                s1[b] += r * d
                s2[b] += r * d * d
    return rsum_arr, s1_arr, s2_arr, total / LN2


def posterior_pass(const double[::1] x, const double[::1] mu, const double[::1] sigma,
                   const double[::1] log_alpha, bint need_grad=True):
    cdef Py_ssize_t n = x.shape[0], k = mu.shape[0], i, b
    cdef double xi, m, acc, lse, L, g
    cdef double total = 0.0
    cdef double inv_ln2 = 1.0 / LN2
    rsum_arr = np.zeros(k)
    gmu_arr = np.zeros(k)
    gls_arr = np.zeros(k)
    cdef double[::1] rsum = rsum_arr
    cdef double[::1] gmu = gmu_arr
    cdef double[::1] gls = gls_arr
    cdef double[::1] lsig = np.log(np.asarray(sigma))
    cdef double[::1] z = np.empty(k)
    cdef double[::1] lp = np.empty(k)
    cdef double[::1] s = np.empty(k)
    cdef double[::1] r = np.empty(k)
    with nogil:
        for i in range(n):
            xi = x[i]
            m = -INFINITY
            for b in range(k):
                z[b] = (xi - mu[b]) / sigma[b]
                lp[b] = -0.5 * z[b] * z[b] - lsig[b] - LN_SQRT_2PI
                s[b] = log_alpha[b] + lp[b]
                if s[b] > m:
                    m = s[b]
            acc = 0.0
            for b in range(k):
                acc += exp(s[b] - m)
            lse = m + log(acc)
            L = 0.0
            for b in range(k):
                r[b] = exp(s[b] - lse)
                L -= r[b] * lp[b]
            L *= inv_ln2
            total += L
            for b in range(k):
                rsum[b] += r[b]
            if need_grad:
                for b in range(k):
                    # d(loss)/d(ln P_b), then chain through the Gaussian
                    g = r[b] * (-lp[b] * inv_ln2 - L - inv_ln2)
                    gmu[b] += g * z[b] / sigma[b]
                    gls[b] += g * (z[b] * z[b] - 1.0)
    return total, rsum_arr, gmu_arr, gls_arr
