"""Goodness-of-fit statistics and tests.

The events are rescaled through the fitted compensator. If the model is
right, the increments ``s_i - s_{i-1}`` look like i.i.d. Exp(1) draws. The
statistic is the weighted L2 distance between their empirical Laplace
transform and ``1 / (1 + u)``::

    ||G_n||^2 = int_0^inf (L_n(u) - 1/(1+u))^2 exp(-c u) du

The integral is evaluated by Gauss-Laguerre quadrature. Critical values
come from a parametric bootstrap that re-simulates from the fitted model
and refits each replicate.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.special import roots_laguerre

from .estimate import fit_mle
from .exceptions import BootstrapDegenerateError, InsufficientEventsError
from .models import EventSequence, ModelKind, ModelSpec, ThetaDomain, compensator_increments
from .simulate import RngStream, sample

__all__ = [
    "WeightFunction",
    "QuadratureRule",
    "GofTestResult",
    "rescale",
    "empirical_laplace",
    "reference_laplace",
    "gof_statistic",
    "critical_value",
    "bootstrap_test",
    "bootstrap_replicate",
    "ks_exponential_test",
    "kolmogorov_sf",
    "DEFAULT_QUAD_ORDER",
]

DEFAULT_QUAD_ORDER = 64
MAX_REFIT_ATTEMPTS = 3


@dataclass(frozen=True)
class WeightFunction:
    """``w(u) = exp(-scale * u)``; integrates to ``1 / scale``."""

    scale: float = 1.0
    kind: str = "exponential_decay"

    def __post_init__(self):
        if not (self.scale > 0 and math.isfinite(self.scale)):
            raise ValueError("weight scale must be positive and finite")
        if self.kind != "exponential_decay":
            raise ValueError(f"unsupported weight kind {self.kind!r}")

    def __call__(self, u):
        return np.exp(-self.scale * np.asarray(u, dtype=np.float64))


@lru_cache(maxsize=32)
def _laguerre(order: int):
    x, w = roots_laguerre(order)
    x.flags.writeable = False
    w.flags.writeable = False
    return x, w


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    """Gauss-Laguerre rule for ``int_0^inf f(u) exp(-c u) du``."""

    nodes: np.ndarray
    weights: np.ndarray
    order: int
    weight: WeightFunction = field(default_factory=WeightFunction)

    @classmethod
    def gauss_laguerre(cls, order: int = DEFAULT_QUAD_ORDER, weight: WeightFunction | None = None):
        weight = weight or WeightFunction()
        if order < 1:
            raise ValueError("quadrature order must be >= 1")
        x, w = _laguerre(int(order))
        c = weight.scale
        return cls(x / c, w / c, int(order), weight)

    def integrate(self, f) -> float:
        return float(np.dot(self.weights, f(self.nodes)))


def rescale(model, theta, events: EventSequence) -> np.ndarray:
    """Increments of the time-transformed process under ``theta``.

    ``model`` may be a :class:`ModelSpec` (its ``kind``, ``a_n`` and window
    are used) or a bare :class:`ModelKind`.
    """
    if isinstance(model, ModelSpec):
        spec = ModelSpec(model.kind, theta, model.a_n, events.window)
    else:
        spec = ModelSpec(ModelKind.parse(model), theta, 1.0, events.window)
    return compensator_increments(spec, events)


def empirical_laplace(increments, u):
    """Mean of ``exp(-u * x_i)``; vectorised over ``u``."""
    x = np.asarray(increments, dtype=np.float64)
    if x.size == 0:
        raise InsufficientEventsError("empirical Laplace transform needs at least one increment")
    u = np.asarray(u, dtype=np.float64)
    vals = np.exp(-np.multiply.outer(u, x)).mean(axis=-1)
    return float(vals) if vals.ndim == 0 else vals


def reference_laplace(u):
    """Laplace transform of Exp(1): ``1 / (1 + u)``."""
    out = 1.0 / (1.0 + np.asarray(u, dtype=np.float64))
    return float(out) if out.ndim == 0 else out


def gof_statistic(increments, quad: QuadratureRule | None = None) -> float:
    """Weighted L2 norm of ``L_n - L`` (without any sqrt(a_n) factor)."""
    quad = quad or QuadratureRule.gauss_laguerre()
    g = empirical_laplace(increments, quad.nodes) - reference_laplace(quad.nodes)
    return math.sqrt(float(np.dot(quad.weights, g * g)))


def _exceed_count(stats: np.ndarray, observed: float) -> int:
    return int(np.count_nonzero(stats >= observed))


def _p_value(stats: np.ndarray, observed: float) -> float:
    return (1 + _exceed_count(stats, observed)) / (stats.size + 1)


def critical_value(bootstrap_stats, level: float) -> float:
    """Threshold ``c`` with ``p_value <= level  <=>  statistic > c``.

    With ``B`` replicates the add-one p-value is at most ``level`` exactly
    when fewer than ``k`` replicates reach the statistic, where ``k`` is
    the largest integer with ``k / (B + 1) <= level``. The threshold is the
    ``k``-th largest bootstrap value (``inf`` when ``k = 0``).
    """
    s = np.sort(np.asarray(bootstrap_stats, dtype=np.float64))[::-1]
    k = 0
    while k < s.size and (k + 1) / (s.size + 1) <= level:
        k += 1
    return math.inf if k == 0 else float(s[k - 1])


@dataclass(frozen=True)
class GofTestResult:
    statistic: float
    bootstrap_stats: tuple
    p_value: float
    level: float
    reject: bool
    n_events: int
    theta_hat: tuple
    bootstrap_nonconverged: int
    kind: ModelKind = ModelKind.CONSTANT_POISSON
    fit_converged: bool = True
    bootstrap_skipped: int = 0

    @property
    def B(self) -> int:
        return len(self.bootstrap_stats)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "statistic": self.statistic,
            "bootstrap_stats": list(self.bootstrap_stats),
            "B": self.B,
            "p_value": self.p_value,
            "level": self.level,
            "reject": self.reject,
            "n_events": self.n_events,
            "theta_hat": dict(zip(self.kind.param_names, self.theta_hat)),
            "fit_converged": self.fit_converged,
            "bootstrap_nonconverged": self.bootstrap_nonconverged,
            "bootstrap_skipped": self.bootstrap_skipped,
        }


def bootstrap_replicate(fitted: ModelSpec, stream: RngStream, quad, domain):
    """One bootstrap draw: simulate, refit, restat.

    Returns ``(statistic or None, nonconverged_count)``. Draws whose refit
    fails for lack of events are retried on fresh attempt streams, at most
    ``MAX_REFIT_ATTEMPTS`` times; ``None`` means the draw was skipped.
    """
    bad = 0
    for attempt in range(MAX_REFIT_ATTEMPTS):
        rs = stream.retry(attempt)
        events = sample(fitted, rs)
        try:
            fit = fit_mle(fitted.kind, events, domain, rs, a_n=fitted.a_n)
        except InsufficientEventsError:
            bad += 1
            continue
        if not fit.converged:
            bad += 1
        inc = rescale(fitted, fit.theta_hat, events)
        return gof_statistic(inc, quad), bad
    return None, bad


def _run_replicate(job):
    fitted, stream, quad_order, scale, domain = job
    quad = QuadratureRule.gauss_laguerre(quad_order, WeightFunction(scale))
    return bootstrap_replicate(fitted, stream, quad, domain)


def bootstrap_test(
    model_kind,
    events: EventSequence,
    B: int = 199,
    level: float = 0.05,
    quad: QuadratureRule | None = None,
    domain: ThetaDomain | None = None,
    rng: RngStream | None = None,
    a_n: float = 1.0,
    workers: int | None = 1,
) -> GofTestResult:
    """Parametric-bootstrap goodness-of-fit test of ``model_kind``.

    Bootstrap sample ``b`` is drawn from ``rng.child(b)``; results are
    collected by index, so the outcome does not depend on ``workers``.

    Raises
    ------
    InsufficientEventsError
        The observed data cannot be fitted.
    BootstrapDegenerateError
        Fewer than ``max(20, B // 2)`` replicates survived (or fewer than
        ``B`` when ``B < 20``).
    """
    from .parallel import pmap

    kind = ModelKind.parse(model_kind)
    if B < 1:
        raise ValueError("B must be >= 1")
    if not 0 < level < 1:
        raise ValueError("level must lie in (0, 1)")
    quad = quad or QuadratureRule.gauss_laguerre()
    domain = domain or ThetaDomain.default(kind)
    rng = rng or RngStream(0)

    fit = fit_mle(kind, events, domain, rng, a_n=a_n)
    fitted = ModelSpec(kind, fit.theta_hat, fit.a_n, events.window)
    observed = gof_statistic(rescale(fitted, fit.theta_hat, events), quad)

    jobs = [(fitted, rng.child(b), quad.order, quad.weight.scale, domain) for b in range(1, B + 1)]
    results = pmap(_run_replicate, jobs, workers)
    stats = np.array([s for s, _ in results if s is not None])
    nonconv = sum(bad for _, bad in results)
    skipped = sum(1 for s, _ in results if s is None)
    if stats.size < min(B, max(20, B // 2)):
        raise BootstrapDegenerateError(f"only {stats.size} of {B} bootstrap replicates usable")

    p = _p_value(stats, observed)
    return GofTestResult(
        statistic=observed,
        bootstrap_stats=tuple(float(v) for v in stats),
        p_value=p,
        level=level,
        reject=p <= level,
        n_events=len(events),
        theta_hat=fit.theta_hat,
        bootstrap_nonconverged=nonconv,
        kind=kind,
        fit_converged=fit.converged,
        bootstrap_skipped=skipped,
    )


# --- classical reference test -------------------------------------------------

def kolmogorov_sf(x: float, tol: float = 1e-12) -> float:
    """Survival function of the Kolmogorov distribution at ``x``.

    Uses ``2 sum (-1)^(k-1) exp(-2 k^2 x^2)`` for ``x >= 1`` and the
    Jacobi-theta form of the CDF below that, both truncated once a term
    drops under ``tol``.
    """
    if x <= 0:
        return 1.0
    if x >= 1.0:
        total = 0.0
        k = 1
        while True:
            term = math.exp(-2.0 * k * k * x * x)
            total += term if k % 2 else -term
            if term < tol:
                break
            k += 1
        return min(1.0, max(0.0, 2.0 * total))
    c = math.pi * math.pi / (8.0 * x * x)
    total = 0.0
    k = 1
    while True:
        term = math.exp(-(2 * k - 1) ** 2 * c)
        total += term
        if term < tol:
            break
        k += 1
    cdf = math.sqrt(2.0 * math.pi) / x * total
    return min(1.0, max(0.0, 1.0 - cdf))


def ks_exponential_test(increments) -> tuple[float, float]:
    """One-sample KS test of ``increments`` against Exp(1).

    Returns ``(D_n, p_value)`` with the asymptotic Kolmogorov p-value at
    ``sqrt(n) * D_n``. No correction for estimated parameters is applied.
    """
    x = np.sort(np.asarray(increments, dtype=np.float64))
    n = x.size
    if n == 0:
        raise InsufficientEventsError("KS test needs at least one increment")
    cdf = -np.expm1(-x)
    i = np.arange(1, n + 1)
    d = max(float(np.max(i / n - cdf)), float(np.max(cdf - (i - 1) / n)))
    return d, kolmogorov_sf(math.sqrt(n) * d)
