"""Pure numpy versions of the per-point passes in ``_kernels.pyx``."""
import math

import numpy as np

_LN2 = math.log(2.0)
_LN_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _log_pdf(x, mu, sigma):
    z = (x[:, None] - mu[None, :]) / sigma[None, :]
    return z, -0.5 * z * z - np.log(sigma)[None, :] - _LN_SQRT_2PI


def _lse(s):
    m = np.max(s, axis=1, keepdims=True)
    return (m + np.log(np.sum(np.exp(s - m), axis=1, keepdims=True)))[:, 0]


def wta_pass(x, mu, sigma, log_alpha):
    k = mu.shape[0]
    _, lp = _log_pdf(x, mu, sigma)
    labels = np.argmax(log_alpha[None, :] + lp, axis=1).astype(np.int64)
    rows = np.arange(x.shape[0])
    d = x - mu[labels]
    counts = np.bincount(labels, minlength=k).astype(np.int64)
    s1 = np.bincount(labels, weights=d, minlength=k)
    s2 = np.bincount(labels, weights=d * d, minlength=k)
    total = -np.sum(lp[rows, labels]) / _LN2
    return labels, counts, s1, s2, float(total)


def soft_pass(x, mu, sigma, log_alpha):
    _, lp = _log_pdf(x, mu, sigma)
    s = log_alpha[None, :] + lp
    lse = _lse(s)
    r = np.exp(s - lse[:, None])
    d = x[:, None] - mu[None, :]
    return (
        r.sum(axis=0),
        (r * d).sum(axis=0),
        (r * d * d).sum(axis=0),
        float(-np.sum(lse) / _LN2),
    )


def posterior_pass(x, mu, sigma, log_alpha, need_grad=True):
    k = mu.shape[0]
    z, lp = _log_pdf(x, mu, sigma)
    s = log_alpha[None, :] + lp
    r = np.exp(s - _lse(s)[:, None])
    ell = -lp / _LN2
    loss = np.sum(r * ell, axis=1)
    if not need_grad:
        return float(loss.sum()), r.sum(axis=0), np.zeros(k), np.zeros(k)
    g = r * (ell - loss[:, None] - 1.0 / _LN2)
    gmu = (g * z / sigma[None, :]).sum(axis=0)
    gls = (g * (z * z - 1.0)).sum(axis=0)
    return float(loss.sum()), r.sum(axis=0), gmu, gls
