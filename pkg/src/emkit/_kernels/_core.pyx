# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled responsibility kernels for the mixture E-step hot loop."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, lgamma, log, INFINITY

cnp.import_array()

cdef double LOG_2PI = 1.8378770664093453


def gmm_posterior(double[::1] y, double[::1] log_w, double[::1] mu, double[::1] var):
    cdef Py_ssize_t n = y.shape[0]
    cdef Py_ssize_t K = log_w.shape[0]
    resp_arr = np.empty((n, K), dtype=np.float64)
    cdef double[:, ::1] resp = resp_arr
    cdef double[::1] log_var = np.log(np.asarray(var))
    cdef Py_ssize_t i, k
    cdef double d, m, s, lse, total = 0.0
    for i in range(n):
        m = -INFINITY
        for k in range(K):
            d = y[i] - mu[k]
            resp[i, k] = log_w[k] - 0.5 * (LOG_2PI + log_var[k] + d * d / var[k])
            if resp[i, k] > m:
                m = resp[i, k]
        if m == -INFINITY:
            raise FloatingPointError("zero total posterior density at some item")
        s = 0.0
        for k in range(K):
            s += exp(resp[i, k] - m)
        lse = m + log(s)
        total += lse
        for k in range(K):
            resp[i, k] = exp(resp[i, k] - lse)
    return total, resp_arr


def poisson_posterior(double[::1] counts, double[::1] log_w, double[::1] rates):
    cdef Py_ssize_t n = counts.shape[0]
    cdef Py_ssize_t K = log_w.shape[0]
    resp_arr = np.empty((n, K), dtype=np.float64)
    cdef double[:, ::1] resp = resp_arr
    cdef double[::1] log_rate = np.log(np.asarray(rates))
    cdef Py_ssize_t i, k
    cdef double m, s, lse, lgam, total = 0.0
    for i in range(n):
        lgam = lgamma(counts[i] + 1.0)
        m = -INFINITY
        for k in range(K):
            resp[i, k] = log_w[k] + counts[i] * log_rate[k] - rates[k] - lgam
            if resp[i, k] > m:
                m = resp[i, k]
        if m == -INFINITY:
            raise FloatingPointError("zero total posterior density at some item")
        s = 0.0
        for k in range(K):
            s += exp(resp[i, k] - m)
        lse = m + log(s)
        total += lse
        for k in range(K):
            resp[i, k] = exp(resp[i, k] - lse)
    return total, resp_arr
