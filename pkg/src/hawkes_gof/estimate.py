"""Log-likelihood, score and maximum-likelihood fitting.

The log-likelihood of events ``t_1 < ... < t_n`` on ``[0, T]`` is::

    l(theta) = sum_i log lambda(t_i, theta) - Lambda(T, theta)

Constant-rate Poisson fits are closed form. The other kinds are fitted by
L-BFGS-B with analytic gradients from several random starting points.
Hawkes fits run in ``(log mu, logit rho, log beta)`` with ``rho = alpha/beta``
so that positivity and stability become simple box constraints.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from . import kernels
from .exceptions import DomainError, InsufficientEventsError
from .models import EventSequence, ModelKind, ModelSpec, ThetaDomain
from .simulate import RngStream

__all__ = ["FitResult", "log_likelihood", "score", "fit_mle", "N_STARTS"]

N_STARTS = 5
MAXITER = 500
FTOL = 1e-10
GTOL = 1e-9
HAWKES_MIN_EVENTS = 3


@dataclass(frozen=True)
class FitResult:
    kind: ModelKind
    theta_hat: tuple
    log_lik: float
    converged: bool
    n_restarts_used: int
    gradient_norm_at_opt: float
    n_events: int
    a_n: float = 1.0

    @property
    def model(self) -> ModelSpec:
        return ModelSpec(self.kind, self.theta_hat, self.a_n)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "theta_hat": dict(zip(self.kind.param_names, self.theta_hat)),
            "log_lik": self.log_lik,
            "converged": self.converged,
            "n_restarts_used": self.n_restarts_used,
            "gradient_norm_at_opt": self.gradient_norm_at_opt,
            "n_events": self.n_events,
            "a_n": self.a_n,
        }


def _times(events) -> tuple[np.ndarray, float]:
    if isinstance(events, EventSequence):
        return events.times, events.window.t_end
    raise TypeError("events must be an EventSequence")


def _ttheta(kind, theta):
    kind = ModelKind.parse(kind)
    theta = tuple(float(v) for v in theta)
    if len(theta) != len(kind.param_names):
        raise DomainError(f"{kind.value} expects {len(kind.param_names)} parameters")
    return kind, theta


def _phi1(z: float) -> float:
    """``int_0^1 s * exp(z s) ds``."""
    if abs(z) < 1e-2:
        return 0.5 + z / 3 + z * z / 8 + z**3 / 30 + z**4 / 144
    return (z * math.exp(z) - math.expm1(z)) / (z * z)


def _value_and_grad(kind, theta, t, t_end, a_n):
    n = t.size
    if kind is ModelKind.CONSTANT_POISSON:
        (mu,) = theta
        if mu <= 0:
            raise DomainError("rate not positive")
        rate = a_n * mu
        return n * math.log(rate) - rate * t_end, np.array([n / mu - a_n * t_end])
    if kind is ModelKind.EXP_AFFINE_POISSON:
        th0, th1 = theta
        z = th1 * t_end
        c = a_n * math.exp(th0)
        big = c * t_end * (math.expm1(z) / z if z != 0 else 1.0)
        d1 = c * t_end * t_end * _phi1(z)
        s = float(t.sum())
        ll = n * math.log(a_n) + n * th0 + th1 * s - big
        return ll, np.array([n - big, s - d1])
    mu, alpha, beta = theta
    if mu <= 0 or alpha < 0 or beta <= 0:
        raise DomainError("Hawkes parameters out of domain")
    ll, g_mu, g_a, g_b = kernels.hawkes_loglik_grad(np.ascontiguousarray(t), t_end, mu, alpha, beta)
    if not math.isfinite(ll):
        raise DomainError("intensity not positive at an event")
    return ll, np.array([g_mu, g_a, g_b])


def log_likelihood(model_kind, theta, events: EventSequence, a_n: float = 1.0) -> float:
    kind, theta = _ttheta(model_kind, theta)
    t, t_end = _times(events)
    return _value_and_grad(kind, theta, t, t_end, a_n)[0]


def score(model_kind, theta, events: EventSequence, a_n: float = 1.0) -> np.ndarray:
    """Analytic gradient of :func:`log_likelihood` in natural parameters."""
    kind, theta = _ttheta(model_kind, theta)
    t, t_end = _times(events)
    return _value_and_grad(kind, theta, t, t_end, a_n)[1]


# --- optimisation coordinates -------------------------------------------------

def _logit(p):
    return math.log(p) - math.log1p(-p)


def _expit(x):
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    e = math.exp(x)
    return e / (1.0 + e)


def _hawkes_from_x(x):
    mu, rho, beta = math.exp(x[0]), _expit(x[1]), math.exp(x[2])
    return (mu, rho * beta, beta), rho


def _hawkes_objective(x, t, t_end):
    (mu, alpha, beta), rho = _hawkes_from_x(x)
    ll, g_mu, g_a, g_b = kernels.hawkes_loglik_grad(t, t_end, mu, alpha, beta)
    if not math.isfinite(ll):
        return math.inf, np.zeros(3)
    # chain rule: alpha = rho * beta
    gx = np.array([
        g_mu * mu,
        g_a * beta * rho * (1.0 - rho),
        (g_b + rho * g_a) * beta,
    ])
    return -ll, -gx


def _exp_affine_objective(x, t, t_end, a_n):
    ll, g = _value_and_grad(ModelKind.EXP_AFFINE_POISSON, tuple(x), t, t_end, a_n)
    return -ll, -g


def _hawkes_starts(gen, n, t_end, domain, k):
    lo, hi = domain.lower, domain.upper
    starts = []
    for _ in range(k):
        rho = float(np.clip(gen.uniform(0.05, 0.9), lo[1], hi[1]))
        log_beta = gen.uniform(math.log(1.0 / t_end), math.log(200.0 / t_end))
        beta = float(np.clip(math.exp(log_beta), lo[2], hi[2]))
        mu = float(np.clip(n * (1.0 - rho) / t_end, lo[0], hi[0]))
        starts.append(np.array([math.log(mu), _logit(rho), math.log(beta)]))
    return starts


def _exp_affine_starts(gen, n, t_end, a_n, domain, k):
    lo, hi = domain.lower, domain.upper
    starts = []
    for _ in range(k):
        th1 = float(np.clip(gen.uniform(-2.0, 2.0) / t_end, lo[1], hi[1]))
        z = th1 * t_end
        # theta0 that makes Lambda(T) = n for this slope
        th0 = math.log(n / (a_n * t_end)) - math.log(math.expm1(z) / z if z != 0 else 1.0)
        starts.append(np.array([float(np.clip(th0, lo[0], hi[0])), th1]))
    return starts


def _generator(rng):
    if rng is None:
        return np.random.Generator(np.random.Philox(0))
    if isinstance(rng, RngStream):
        return rng.fitting()
    return rng


def fit_mle(
    model_kind,
    events: EventSequence,
    domain: ThetaDomain | None = None,
    rng=None,
    a_n: float = 1.0,
    n_starts: int = N_STARTS,
) -> FitResult:
    """Maximum-likelihood fit of ``model_kind`` to ``events``.

    Parameters
    ----------
    model_kind : ModelKind or str
    events : EventSequence
    domain : ThetaDomain, optional
        Box constraints; defaults to :meth:`ThetaDomain.default`.
    rng : RngStream or numpy Generator, optional
        Source of the multi-start points. An :class:`RngStream` contributes
        its dedicated fitting generator.
    a_n : float
        Known intensity scale for Poisson kinds (ignored for Hawkes).

    Raises
    ------
    InsufficientEventsError
        If there are no events.
    """
    kind = ModelKind.parse(model_kind)
    domain = domain or ThetaDomain.default(kind)
    if domain.kind is not kind:
        raise ValueError("domain kind does not match model kind")
    t, t_end = _times(events)
    t = np.ascontiguousarray(t)
    n = t.size
    if n == 0:
        raise InsufficientEventsError("cannot fit a model to zero events")
    if kind is ModelKind.HAWKES_EXP:
        a_n = 1.0

    def result(theta, converged, used):
        ll, g = _value_and_grad(kind, theta, t, t_end, a_n)
        return FitResult(kind, tuple(float(v) for v in theta), float(ll), bool(converged),
                         used, float(np.linalg.norm(g)), n, a_n)

    if kind is ModelKind.CONSTANT_POISSON:
        mu = float(np.clip(n / (a_n * t_end), domain.lower[0], domain.upper[0]))
        return result((mu,), True, 0)

    if kind is ModelKind.HAWKES_EXP and n < HAWKES_MIN_EVENTS:
        beta = float(np.clip(1.0 / t_end, domain.lower[2], domain.upper[2]))
        mu = float(np.clip(n / t_end, domain.lower[0], domain.upper[0]))
        return result((mu, domain.lower[1] * beta, beta), False, 0)

    gen = _generator(rng)
    if kind is ModelKind.HAWKES_EXP:
        starts = _hawkes_starts(gen, n, t_end, domain, n_starts)
        bounds = [
            (math.log(domain.lower[0]), math.log(domain.upper[0])),
            (_logit(domain.lower[1]), _logit(domain.upper[1])),
            (math.log(domain.lower[2]), math.log(domain.upper[2])),
        ]
        fun, args = _hawkes_objective, (t, t_end)
    else:
        starts = _exp_affine_starts(gen, n, t_end, a_n, domain, n_starts)
        bounds = list(zip(domain.lower, domain.upper))
        fun, args = _exp_affine_objective, (t, t_end, a_n)

    best = None
    for x0 in starts:
        res = minimize(fun, x0, args=args, jac=True, method="L-BFGS-B", bounds=bounds,
                       options={"maxiter": MAXITER, "ftol": FTOL, "gtol": GTOL})
        if not math.isfinite(res.fun):
            continue
        if best is None or res.fun < best.fun:
            best = res
    if best is None:
        raise InsufficientEventsError("no start produced a finite likelihood")
    if kind is ModelKind.HAWKES_EXP:
        theta, _ = _hawkes_from_x(best.x)
    else:
        theta = tuple(best.x)
    return result(theta, best.success, len(starts))
