"""Pure-Python fallback for the kernels in ``_core.pyx``.

Same signatures, same arithmetic order. Used when the extension is not
built or when ``HAWKES_GOF_PURE_PYTHON`` is set.
"""
import math

import numpy as np


def hawkes_increments(t, mu, alpha, beta):
    out = np.empty(len(t), dtype=np.float64)
    prev = 0.0
    excite = 0.0
    exp, expm1 = math.exp, math.expm1
    for i, ti in enumerate(t.tolist()):
        d = ti - prev
        out[i] = mu * d - excite * expm1(-beta * d) / beta
        excite = excite * exp(-beta * d) + alpha
        prev = ti
    return out


def hawkes_loglik_grad(t, t_end, mu, alpha, beta):
    exp, expm1, log = math.exp, math.expm1, math.log
    a = b = 0.0
    ll = g_mu = g_a = g_b = 0.0
    prev = None
    for ti in t.tolist():
        if prev is not None:
            d = ti - prev
            e = exp(-beta * d)
            b, a = e * (b + d * (1.0 + a)), e * (1.0 + a)
        prev = ti
        lam = mu + alpha * a
        if lam <= 0.0:
            return (-math.inf, math.nan, math.nan, math.nan)
        inv = 1.0 / lam
        ll += log(lam)
        g_mu += inv
        g_a += a * inv
        g_b -= alpha * b * inv
        tau = t_end - ti
        em = -expm1(-beta * tau)
        ll -= alpha / beta * em
        g_a -= em / beta
        g_b += alpha / (beta * beta) * em - alpha / beta * tau * exp(-beta * tau)
    ll -= mu * t_end
    g_mu -= t_end
    return (ll, g_mu, g_a, g_b)


def hawkes_thin(mu, alpha, beta, t_end, t, excite, last, exps, us, out, n_out):
    exp = math.exp
    cap = out.shape[0]
    bad = 0
    k = 0
    for e_k, u_k in zip(exps.tolist(), us.tolist()):
        lam_bar = mu + excite
        w = e_k / lam_bar
        t_c = t + w
        if t_c > t_end:
            return (n_out, t, excite, last, k + 1, True, bad)
        excite_c = excite * exp(-beta * w)
        lam = mu + excite_c
        if lam > lam_bar:
            bad += 1
        if u_k * lam_bar <= lam and t_c > last:
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
