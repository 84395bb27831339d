"""Shared fixtures and independent oracles.

The oracles here never call the code paths they check: compensators are
integrated numerically from the intensity, Hawkes increments are summed
directly in O(n^2), and gradients are taken by finite differences.
"""
import math

import numpy as np
import pytest
from scipy.integrate import quad

from hawkes_gof.models import EventSequence, ModelKind, ModelSpec, intensity_at


def numeric_compensator(model, history, t):
    """Adaptive quadrature of ``intensity_at`` with breakpoints at events."""
    if isinstance(history, EventSequence):
        history = history.times
    h = np.asarray([] if history is None else history, float)
    cuts = [0.0] + [float(x) for x in h if 0 < x < t] + [t]
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        if b > a:
            # evaluate strictly inside each piece so the left-open rule is irrelevant
            val, _ = quad(lambda s: intensity_at(model, h, s), a, b, epsabs=0, epsrel=1e-13, limit=200)
            total += val
    return total


def direct_hawkes_compensator(mu, alpha, beta, times, t):
    past = times[times < t]
    return mu * t + (alpha / beta) * float(np.sum(1.0 - np.exp(-beta * (t - past))))


def direct_hawkes_increments(mu, alpha, beta, times):
    """O(n^2) reference: difference of directly summed compensators."""
    vals = [0.0] + [direct_hawkes_compensator(mu, alpha, beta, times, t) for t in times]
    return np.diff(vals)


def direct_loglik(model, events):
    """``sum log lambda(t_i) - Lambda(T)`` by brute force."""
    t = events.times
    T = events.window.t_end
    ll = sum(math.log(intensity_at(model, t, ti)) for ti in t)
    if model.kind is ModelKind.HAWKES_EXP:
        mu, a, b = model.theta
        return ll - direct_hawkes_compensator(mu, a, b, t, T)
    return ll - numeric_compensator(model, None, T)


def central_fd(f, theta, rel=1e-5):
    theta = np.asarray(theta, float)
    g = np.empty_like(theta)
    for k in range(theta.size):
        h = rel * max(1.0, abs(theta[k]))
        up, dn = theta.copy(), theta.copy()
        up[k] += h
        dn[k] -= h
        g[k] = (f(up) - f(dn)) / (2 * h)
    return g


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


@pytest.fixture
def hawkes_small():
    return ModelSpec.hawkes(1.0, 1.0, 2.0)


# --- acceptance report ----------------------------------------------------------

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
