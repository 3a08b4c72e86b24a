# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled likelihood kernels; same contract as ``_pykernels``.

The optimization loop runs without the GIL so independent fits can share a
thread pool.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport exp, log1p, sqrt, fabs, fmin, fmax

cnp.import_array()

cdef double Z_CLAMP = 50.0

cdef enum:
    STOP_GRAD_TOL = 0
    STOP_PARAM_TOL = 1
    STOP_MAX_ITERS = 2
    STOP_SEPARATION = 3


cdef inline double softplus(double x) noexcept nogil:
    if x > 0:
        return x + log1p(exp(-x))
    return log1p(exp(x))


cdef double _loglik(const cnp.int64_t[:] ii, const cnp.int64_t[:] jj,
                    const cnp.int64_t[:] kk, const double[:] n,
                    const double[:] ybar, const double[:] s,
                    const double[:] gam) noexcept nogil:
    cdef Py_ssize_t t
    cdef double z, acc = 0.0
    for t in range(ii.shape[0]):
        z = gam[kk[t]] * (s[ii[t]] - s[jj[t]])
        # y sp(-z) + (1 - y) sp(z) = sp(z) - y z
        acc -= n[t] * (softplus(z) - ybar[t] * z)
    return acc


cdef double _grad(const cnp.int64_t[:] ii, const cnp.int64_t[:] jj,
                  const cnp.int64_t[:] kk, const double[:] n,
                  const double[:] ybar, const double[:] s,
                  const double[:] alpha, double[:] gam, double[:] gs,
                  double[:] ga, double* max_abs_z, double* outward,
                  bint want_ll) noexcept nogil:
    """Accumulate the gradient into gs/ga; return the log-likelihood if asked."""
    cdef Py_ssize_t t, a, b, c
    cdef double g, z, zc, p, r, ll = 0.0, mz = 0.0, out = 0.0
    for a in range(gs.shape[0]):
        gs[a] = 0.0
    for c in range(ga.shape[0]):
        ga[c] = 0.0
        gam[c] = exp(alpha[c])
    for t in range(ii.shape[0]):
        a = ii[t]
        b = jj[t]
        c = kk[t]
        g = gam[c]
        z = g * (s[a] - s[b])
        # exp(50) is finite, so the clamped form needs no sign branch
        zc = fmin(fmax(z, -Z_CLAMP), Z_CLAMP)
        p = 1.0 / (1.0 + exp(-zc))
        r = n[t] * (ybar[t] - p)
        gs[a] += g * r
        gs[b] -= g * r
        ga[c] += z * r
        out += z * r
        mz = fmax(mz, fabs(z))
        if want_ll:
            ll -= n[t] * (softplus(z) - ybar[t] * z)
    max_abs_z[0] = mz
    outward[0] = out
    return ll


def loglik(ii, jj, kk, n, ybar, s, alpha):
    gam = np.exp(np.asarray(alpha, dtype=np.float64))
    return _loglik(ii, jj, kk, n, ybar, np.ascontiguousarray(s, dtype=np.float64), gam)


def grad(ii, jj, kk, n, ybar, s, alpha):
    cdef double mz, out
    s = np.ascontiguousarray(s, dtype=np.float64)
    alpha = np.ascontiguousarray(alpha, dtype=np.float64)
    gs = np.zeros(len(s))
    ga = np.zeros(len(alpha))
    _grad(ii, jj, kk, n, ybar, s, alpha, np.zeros(len(alpha)), gs, ga, &mz, &out, False)
    return np.concatenate([gs, ga])


cdef inline double _mean(double[:] x) noexcept nogil:
    cdef Py_ssize_t q
    cdef double acc = 0.0
    for q in range(x.shape[0]):
        acc += x[q]
    return acc / x.shape[0]


def adam(ii, jj, kk, n, ybar, s0, alpha0, bint fit_alpha, double lr,
         double beta1, double beta2, double eps, long max_iters,
         double grad_tol, double param_tol, double sep_z, bint trace):
    """Projected Adam ascent on the mean log-likelihood.

    Returns ``(s, alpha, iterations, stop_code, trace_rows)``.
    """
    cdef const cnp.int64_t[:] vi = ii
    cdef const cnp.int64_t[:] vj = jj
    cdef const cnp.int64_t[:] vk = kk
    cdef const double[:] vn = n
    cdef const double[:] vy = ybar
    cdef Py_ssize_t n_cand = len(s0), n_judge = len(alpha0), q
    s_arr = np.array(s0, dtype=np.float64)
    a_arr = np.array(alpha0, dtype=np.float64)
    if not fit_alpha:
        a_arr[:] = 0.0
    cdef double[:] s = s_arr
    cdef double[:] alpha = a_arr
    cdef double[:] gs = np.zeros(n_cand)
    cdef double[:] ga = np.zeros(n_judge)
    cdef double[:] gam = np.zeros(n_judge)
    cdef double[:] m_s = np.zeros(n_cand)
    cdef double[:] v_s = np.zeros(n_cand)
    cdef double[:] m_a = np.zeros(n_judge)
    cdef double[:] v_a = np.zeros(n_judge)
    cdef double[:] step_s = np.zeros(n_cand)
    cdef double[:] step_a = np.zeros(n_judge)
    trace_arr = np.zeros((max_iters + 1 if trace else 0, 3))
    cdef double[:, :] rows = trace_arr
    cdef double total = 0.0, pg, mu, ll, mz, out, c1, c2, b1t = 1.0, b2t = 1.0
    cdef double change, d
    cdef long t, done = 0, n_rows = 0
    cdef int stop = STOP_MAX_ITERS
    for q in range(vn.shape[0]):
        total += vn[q]
    with nogil:
        for t in range(1, max_iters + 1):
            ll = _grad(vi, vj, vk, vn, vy, s, alpha, gam, gs, ga, &mz, &out, trace)
            for q in range(n_cand):
                gs[q] /= total
            for q in range(n_judge):
                ga[q] /= total
            pg = 0.0
            mu = _mean(gs)
            for q in range(n_cand):
                if fabs(gs[q] - mu) > pg:
                    pg = fabs(gs[q] - mu)
            if fit_alpha:
                mu = _mean(ga)
                for q in range(n_judge):
                    if fabs(ga[q] - mu) > pg:
                        pg = fabs(ga[q] - mu)
            if trace:
                rows[n_rows, 0] = t - 1
                rows[n_rows, 1] = ll
                rows[n_rows, 2] = pg
                n_rows += 1
            if pg < grad_tol:
                stop = STOP_GRAD_TOL
                break
            if mz > sep_z and out > 0.0:
                stop = STOP_SEPARATION
                break
            b1t *= beta1
            b2t *= beta2
            c1 = 1.0 - b1t
            c2 = 1.0 - b2t
            for q in range(n_cand):
                m_s[q] = beta1 * m_s[q] + (1.0 - beta1) * gs[q]
                v_s[q] = beta2 * v_s[q] + (1.0 - beta2) * gs[q] * gs[q]
                step_s[q] = s[q] + lr * (m_s[q] / c1) / (sqrt(v_s[q] / c2) + eps)
            mu = _mean(step_s)
            change = 0.0
            for q in range(n_cand):
                d = step_s[q] - mu
                if fabs(d - s[q]) > change:
                    change = fabs(d - s[q])
                s[q] = d
            if fit_alpha:
                for q in range(n_judge):
                    m_a[q] = beta1 * m_a[q] + (1.0 - beta1) * ga[q]
                    v_a[q] = beta2 * v_a[q] + (1.0 - beta2) * ga[q] * ga[q]
                    step_a[q] = alpha[q] + lr * (m_a[q] / c1) / (sqrt(v_a[q] / c2) + eps)
                mu = _mean(step_a)
                for q in range(n_judge):
                    d = step_a[q] - mu
                    if fabs(d - alpha[q]) > change:
                        change = fabs(d - alpha[q])
                    alpha[q] = d
            done = t
            if change < param_tol:
                stop = STOP_PARAM_TOL
                break
    trace_rows = trace_arr[:n_rows].copy() if trace else None
    return s_arr, a_arr, done, stop, trace_rows
