"""Pure numpy implementation of the likelihood kernels.

Mirrors ``_ckernels.pyx`` function for function. All arrays describe the
aggregated triple set column-wise: ``ii``, ``jj``, ``kk`` are int64 indices,
``n`` holds counts and ``ybar`` mean outcomes (both float64).
"""

import numpy as np

Z_CLAMP = 50.0

STOP_GRAD_TOL = 0
STOP_PARAM_TOL = 1
STOP_MAX_ITERS = 2
STOP_SEPARATION = 3


def _softplus(x):
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def _sigmoid(z):
    # branch-on-sign form, never exponentiates a positive argument
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def loglik(ii, jj, kk, n, ybar, s, alpha):
    z = np.exp(alpha[kk]) * (s[ii] - s[jj])
    return -float(np.sum(n * (ybar * _softplus(-z) + (1.0 - ybar) * _softplus(z))))


def _residuals(ii, jj, kk, n, ybar, s, alpha):
    g = np.exp(alpha[kk])
    z = g * (s[ii] - s[jj])
    p = _sigmoid(np.clip(z, -Z_CLAMP, Z_CLAMP))
    return g, z, n * (ybar - p)


def _scatter(ii, jj, kk, g, z, r, n_cand, n_judge):
    gr = g * r
    gs = np.bincount(ii, gr, n_cand) - np.bincount(jj, gr, n_cand)
    ga = np.bincount(kk, z * r, n_judge)
    return gs, ga


def grad(ii, jj, kk, n, ybar, s, alpha):
    g, z, r = _residuals(ii, jj, kk, n, ybar, s, alpha)
    gs, ga = _scatter(ii, jj, kk, g, z, r, len(s), len(alpha))
    return np.concatenate([gs, ga])


def adam(ii, jj, kk, n, ybar, s0, alpha0, fit_alpha, lr, beta1, beta2, eps,
         max_iters, grad_tol, param_tol, sep_z, trace):
    """Projected Adam ascent on the mean log-likelihood.

    Returns ``(s, alpha, iterations, stop_code, trace_rows)`` where
    ``trace_rows`` is an ``(iterations, 3)`` array of
    ``(iter, loglik, grad_norm)`` or None.
    """
    n_cand, n_judge = len(s0), len(alpha0)
    s = np.array(s0, dtype=np.float64)
    alpha = np.array(alpha0, dtype=np.float64)
    if not fit_alpha:
        alpha[:] = 0.0
    total = float(np.sum(n))
    m_s = np.zeros(n_cand)
    v_s = np.zeros(n_cand)
    m_a = np.zeros(n_judge)
    v_a = np.zeros(n_judge)
    b1t = b2t = 1.0
    rows = [] if trace else None
    stop = STOP_MAX_ITERS
    done = 0
    for t in range(1, max_iters + 1):
        g, z, r = _residuals(ii, jj, kk, n, ybar, s, alpha)
        gs, ga = _scatter(ii, jj, kk, g, z, r, n_cand, n_judge)
        gs /= total
        ga /= total
        pg = np.abs(gs - gs.mean()).max()
        if fit_alpha:
            pg = max(pg, np.abs(ga - ga.mean()).max())
        else:
            ga[:] = 0.0
        if trace:
            ll = -float(np.sum(n * (ybar * _softplus(-z) + (1.0 - ybar) * _softplus(z))))
            rows.append((t - 1, ll, pg))
        if pg < grad_tol:
            stop = STOP_GRAD_TOL
            break
        if np.abs(z).max() > sep_z and float(np.dot(z, r)) > 0.0:
            stop = STOP_SEPARATION
            break
        b1t *= beta1
        b2t *= beta2
        c1 = 1.0 - b1t
        c2 = 1.0 - b2t
        m_s = beta1 * m_s + (1.0 - beta1) * gs
        v_s = beta2 * v_s + (1.0 - beta2) * gs * gs
        new_s = s + lr * (m_s / c1) / (np.sqrt(v_s / c2) + eps)
        new_s -= new_s.mean()
        change = np.abs(new_s - s).max()
        s = new_s
        if fit_alpha:
            m_a = beta1 * m_a + (1.0 - beta1) * ga
            v_a = beta2 * v_a + (1.0 - beta2) * ga * ga
            new_a = alpha + lr * (m_a / c1) / (np.sqrt(v_a / c2) + eps)
            new_a -= new_a.mean()
            change = max(change, np.abs(new_a - alpha).max())
            alpha = new_a
        done = t
        if change < param_tol:
            stop = STOP_PARAM_TOL
            break
    trace_rows = np.array(rows, dtype=np.float64).reshape(-1, 3) if trace else None
    return s, alpha, done, stop, trace_rows
