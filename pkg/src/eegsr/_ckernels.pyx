# cython: language_level=3
"""Compiled inner loops. Mirrors ``eegsr._pykernels`` function for function."""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log, INFINITY

cnp.import_array()


cdef inline double _lse2(double a, double b) nogil:
    cdef double m
    if a == -INFINITY:
        return b
    if b == -INFINITY:
        return a
    m = a if a > b else b
    return m + log(exp(a - m) + exp(b - m))


def sos_filter(const double[:, ::1] sos, const double[:, ::1] x):
    """Cascaded direct-form-II-transposed biquads, zero initial state, per row."""
    cdef Py_ssize_t n_sec = sos.shape[0]
    cdef Py_ssize_t n_ch = x.shape[0]
    cdef Py_ssize_t n = x.shape[1]
    out = np.empty((n_ch, n), dtype=np.float64)
    cdef double[:, ::1] y = out
    cdef Py_ssize_t c, i, k
    cdef double v, w, s1, s2, b0, b1, b2, a1, a2
    cdef double[:, ::1] state = np.zeros((n_sec, 2), dtype=np.float64)
    with nogil:
        for c in range(n_ch):
            for k in range(n_sec):
                state[k, 0] = 0.0
                state[k, 1] = 0.0
            for i in range(n):
                v = x[c, i]
                for k in range(n_sec):
                    b0 = sos[k, 0]
                    b1 = sos[k, 1]
                    b2 = sos[k, 2]
                    a1 = sos[k, 4]
                    a2 = sos[k, 5]
                    s1 = state[k, 0]
                    s2 = state[k, 1]
                    w = b0 * v + s1
                    state[k, 0] = b1 * v - a1 * w + s2
                    state[k, 1] = b2 * v - a2 * w
                    v = w
                y[c, i] = v
    return out


def ctc_alpha_beta(const double[:, ::1] logp, const long[::1] label, long blank):
    """Log-likelihood of ``label`` and the per-frame class posteriors.

    Returns ``(log_z, posterior)`` with ``posterior[t, k]`` the probability
    that frame ``t`` emits class ``k`` given the label.
    """
    cdef Py_ssize_t T = logp.shape[0]
    cdef Py_ssize_t C = logp.shape[1]
    cdef Py_ssize_t L = label.shape[0]
    cdef Py_ssize_t S = 2 * L + 1
    cdef Py_ssize_t t, s, k
    cdef double v, log_z, e
    ext_arr = np.full(S, blank, dtype=np.int64)
    cdef long[::1] ext = ext_arr
    for s in range(L):
        ext[2 * s + 1] = label[s]
    alpha_arr = np.full((T, S), -np.inf)
    beta_arr = np.full((T, S), -np.inf)
    post_arr = np.zeros((T, C))
    cdef double[:, ::1] alpha = alpha_arr
    cdef double[:, ::1] beta = beta_arr
    cdef double[:, ::1] post = post_arr
    cdef double[::1] acc = np.empty(C)

    with nogil:
        alpha[0, 0] = logp[0, ext[0]]
        if S > 1:
            alpha[0, 1] = logp[0, ext[1]]
        for t in range(1, T):
            for s in range(S):
                v = alpha[t - 1, s]
                if s >= 1:
                    v = _lse2(v, alpha[t - 1, s - 1])
                if s >= 2 and ext[s] != blank and ext[s] != ext[s - 2]:
                    v = _lse2(v, alpha[t - 1, s - 2])
                if v != -INFINITY:
                    alpha[t, s] = v + logp[t, ext[s]]

        beta[T - 1, S - 1] = logp[T - 1, ext[S - 1]]
        if S > 1:
            beta[T - 1, S - 2] = logp[T - 1, ext[S - 2]]
        for t in range(T - 2, -1, -1):
            for s in range(S):
                v = beta[t + 1, s]
                if s + 1 < S:
                    v = _lse2(v, beta[t + 1, s + 1])
                if s + 2 < S and ext[s] != blank and ext[s] != ext[s + 2]:
                    v = _lse2(v, beta[t + 1, s + 2])
                if v != -INFINITY:
                    beta[t, s] = v + logp[t, ext[s]]

        log_z = alpha[T - 1, S - 1]
        if S > 1:
            log_z = _lse2(log_z, alpha[T - 1, S - 2])

        if log_z != -INFINITY:
            for t in range(T):
                for k in range(C):
                    acc[k] = -INFINITY
                for s in range(S):
                    if alpha[t, s] == -INFINITY or beta[t, s] == -INFINITY:
                        continue
                    e = alpha[t, s] + beta[t, s] - logp[t, ext[s]]
                    acc[ext[s]] = _lse2(acc[ext[s]], e)
                for k in range(C):
                    if acc[k] != -INFINITY:
                        post[t, k] = exp(acc[k] - log_z)
    return log_z, post_arr


def edit_ops(const long[::1] ref, const long[::1] hyp):
    """Minimum-cost (substitutions, deletions, insertions) turning ref into hyp."""
    cdef Py_ssize_t n = ref.shape[0]
    cdef Py_ssize_t m = hyp.shape[0]
    cdef Py_ssize_t i, j
    cdef long a, b, c, best
    d_arr = np.empty((n + 1, m + 1), dtype=np.int64)
    cdef long[:, ::1] d = d_arr
    for i in range(n + 1):
        d[i, 0] = i
    for j in range(m + 1):
        d[0, j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            a = d[i - 1, j - 1] + (0 if ref[i - 1] == hyp[j - 1] else 1)
            b = d[i - 1, j] + 1
            c = d[i, j - 1] + 1
            best = a
            if b < best:
                best = b
            if c < best:
                best = c
            d[i, j] = best
    cdef long subs = 0, dels = 0, ins = 0
    i = n
    j = m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and ref[i - 1] == hyp[j - 1] and d[i - 1, j - 1] == d[i, j]:
            i -= 1
            j -= 1
        elif i > 0 and j > 0 and d[i - 1, j - 1] + 1 == d[i, j]:
            subs += 1
            i -= 1
            j -= 1
        elif i > 0 and d[i - 1, j] + 1 == d[i, j]:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return subs, dels, ins
