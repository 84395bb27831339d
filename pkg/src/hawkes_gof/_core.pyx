# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the exponential-kernel Hawkes process.

Every function here has a line-for-line twin in ``_pycore.py``; the two
must stay numerically interchangeable (see tests/test_kernels.py).
"""
import numpy as np

from libc.math cimport exp, expm1, log


def hawkes_increments(const double[::1] t, double mu, double alpha, double beta):
    """Compensator increments over consecutive events, starting from 0."""
    cdef Py_ssize_t n = t.shape[0], i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double prev = 0.0, excite = 0.0, d
    for i in range(n):
        d = t[i] - prev
        o[i] = mu * d - excite * expm1(-beta * d) / beta
        excite = excite * exp(-beta * d) + alpha
        prev = t[i]
    return out


def hawkes_loglik_grad(const double[::1] t, double t_end, double mu,
                       double alpha, double beta):
    """Log-likelihood and its gradient in (mu, alpha, beta).

    Returns ``(ll, d_mu, d_alpha, d_beta)``; ``ll`` is ``-inf`` when the
    intensity is not positive at some event.
    """
    cdef Py_ssize_t n = t.shape[0], i
    cdef double a = 0.0, b = 0.0, bn, d, e, lam, inv, tau, em
    cdef double ll = 0.0, g_mu = 0.0, g_a = 0.0, g_b = 0.0
    for i in range(n):
        if i > 0:
            d = t[i] - t[i - 1]
            e = exp(-beta * d)
            bn = e * (b + d * (1.0 + a))
            a = e * (1.0 + a)
            b = bn
        lam = mu + alpha * a
        if lam <= 0.0:
            return (-np.inf, np.nan, np.nan, np.nan)
        inv = 1.0 / lam
        ll += log(lam)
        g_mu += inv
        g_a += a * inv
        g_b -= alpha * b * inv
        tau = t_end - t[i]
        em = -expm1(-beta * tau)
        ll -= alpha / beta * em
        g_a -= em / beta
        g_b += alpha / (beta * beta) * em - alpha / beta * tau * exp(-beta * tau)
    ll -= mu * t_end
    g_mu -= t_end
    return (ll, g_mu, g_a, g_b)


def hawkes_thin(double mu, double alpha, double beta, double t_end,
                double t, double excite, double last,
                const double[::1] exps, const double[::1] us,
                double[::1] out, Py_ssize_t n_out):
    """Ogata thinning over one block of pre-drawn variates.

    State is ``(t, excite, last)``: current time, excitation just after
    ``t`` and the last accepted event. Returns
    ``(n_out, t, excite, last, consumed, done, bad)`` where ``bad`` counts
    acceptance ratios above one (must stay 0).
    """
    cdef Py_ssize_t k = 0, m = exps.shape[0], cap = out.shape[0]
    cdef Py_ssize_t bad = 0
    cdef double lam_bar, w, t_c, excite_c, lam
    while k < m:
        lam_bar = mu + excite
        w = exps[k] / lam_bar
        t_c = t + w
        if t_c > t_end:
            return (n_out, t, excite, last, k + 1, True, bad)
        excite_c = excite * exp(-beta * w)
        lam = mu + excite_c
        if lam > lam_bar:
            bad += 1
        if us[k] * lam_bar <= lam and t_c > last:
            if n_out == cap:
                return (n_out, t, excite, last, k, False, bad)
            out[n_out] = t_c
            n_out += 1
            last = t_c
            excite = excite_c + alpha
        else:
            excite = excite_c
        t = t_c
        k += 1
    return (n_out, t, excite, last, k, False, bad)
