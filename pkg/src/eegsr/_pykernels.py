"""Pure numpy versions of the compiled kernels in ``_ckernels.pyx``.

Same signatures and return conventions; used when the extension is not
built or when ``EEGSR_PURE_PYTHON=1`` is set.
"""

import numpy as np


def sos_filter(sos, x):
    sos = np.asarray(sos, dtype=np.float64)
    y = np.array(x, dtype=np.float64, copy=True)
    n = y.shape[1]
    for b0, b1, b2, _, a1, a2 in sos:
        s1 = np.zeros(y.shape[0])
        s2 = np.zeros(y.shape[0])
        out = np.empty_like(y)
        # row-vectorized recursion; sample loop is inherently sequential
        for i in range(n):
            v = y[:, i]
            w = b0 * v + s1
            s1 = b1 * v - a1 * w + s2
            s2 = b2 * v - a2 * w
            out[:, i] = w
        y = out
    return y


def ctc_alpha_beta(logp, label, blank):
    logp = np.asarray(logp, dtype=np.float64)
    T, C = logp.shape
    L = len(label)
    S = 2 * L + 1
    ext = np.full(S, blank, dtype=np.int64)
    ext[1::2] = label
    # transitions s-2 -> s allowed for non-blank labels differing from s-2
    skip = np.zeros(S, dtype=bool)
    if S > 2:
        skip[2:] = (ext[2:] != blank) & (ext[2:] != ext[:-2])

    emit = logp[:, ext]
    alpha = np.full((T, S), -np.inf)
    beta = np.full((T, S), -np.inf)
    alpha[0, 0] = emit[0, 0]
    if S > 1:
        alpha[0, 1] = emit[0, 1]
    with np.errstate(invalid="ignore"):
        for t in range(1, T):
            prev = alpha[t - 1]
            cand = np.full((3, S), -np.inf)
            cand[0] = prev
            cand[1, 1:] = prev[:-1]
            cand[2, 2:] = np.where(skip[2:], prev[:-2], -np.inf)
            alpha[t] = np.logaddexp.reduce(cand, axis=0) + emit[t]

        beta[T - 1, S - 1] = emit[T - 1, S - 1]
        if S > 1:
            beta[T - 1, S - 2] = emit[T - 1, S - 2]
        skip_fwd = np.zeros(S, dtype=bool)
        skip_fwd[:-2] = skip[2:]
        for t in range(T - 2, -1, -1):
            nxt = beta[t + 1]
            cand = np.full((3, S), -np.inf)
            cand[0] = nxt
            cand[1, :-1] = nxt[1:]
            cand[2, :-2] = np.where(skip_fwd[:-2], nxt[2:], -np.inf)
            beta[t] = np.logaddexp.reduce(cand, axis=0) + emit[t]

    log_z = alpha[T - 1, S - 1]
    if S > 1:
        log_z = np.logaddexp(log_z, alpha[T - 1, S - 2])
    post = np.zeros((T, C))
    if np.isfinite(log_z):
        live = np.isfinite(alpha) & np.isfinite(beta)
        occ = np.zeros((T, S))
        with np.errstate(invalid="ignore"):
            occ[live] = np.exp((alpha + beta - emit)[live] - log_z)
        for s in range(S):
            post[:, ext[s]] += occ[:, s]
    return float(log_z), post


def edit_ops(ref, hyp):
    n, m = len(ref), len(hyp)
    d = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(n + 1):
        d[i][0] = i
    for j in range(m + 1):
        d[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            d[i][j] = min(
                d[i - 1][j - 1] + (ref[i - 1] != hyp[j - 1]),
                d[i - 1][j] + 1,
                d[i][j - 1] + 1,
            )
    subs = dels = ins = 0
    i, j = n, m
    while i > 0 or j > 0:
        if i and j and ref[i - 1] == hyp[j - 1] and d[i - 1][j - 1] == d[i][j]:
            i, j = i - 1, j - 1
        elif i and j and d[i - 1][j - 1] + 1 == d[i][j]:
            subs += 1
            i, j = i - 1, j - 1
        elif i and d[i - 1][j] + 1 == d[i][j]:
            dels += 1
            i -= 1
        else:
            ins += 1
            j -= 1
    return subs, dels, ins
