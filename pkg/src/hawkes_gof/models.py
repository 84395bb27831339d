"""Parametric intensity models and their compensators.

Three families are supported:

``constant_poisson``
    ``lambda(t) = a_n * mu``
``exp_affine_poisson``
    ``lambda(t) = a_n * exp(theta0 + theta1 * t)``
``hawkes_exp``
    ``lambda(t) = mu + sum_{t_i < t} alpha * exp(-beta * (t - t_i))``

Excitation is left-open: an event at exactly ``t`` does not contribute to
``lambda(t)``. For Hawkes models the scale ``a_n`` is fixed to one and the
overall level lives in ``mu``.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .exceptions import DomainError, InvariantViolation, ValidationError

__all__ = [
    "ModelKind",
    "ObservationWindow",
    "EventSequence",
    "ModelSpec",
    "ThetaDomain",
    "intensity_at",
    "compensator",
    "compensator_increments",
    "inverse_compensator",
    "inverse_compensator_array",
    "validate",
    "check",
    "expected_count",
]

INVERSE_RTOL = 1e-10
INVERSE_MAXITER = 200


class ModelKind(str, enum.Enum):
    CONSTANT_POISSON = "constant_poisson"
    EXP_AFFINE_POISSON = "exp_affine_poisson"
    HAWKES_EXP = "hawkes_exp"

    @property
    def is_poisson(self) -> bool:
        return self is not ModelKind.HAWKES_EXP

    @property
    def param_names(self) -> tuple[str, ...]:
        return _PARAM_NAMES[self]

    @classmethod
    def parse(cls, value) -> "ModelKind":
        if isinstance(value, cls):
            return value
        key = str(value).strip().lower().replace("-", "_")
        key = _ALIASES.get(key, key)
        try:
            return cls(key)
        except ValueError:
            choices = ", ".join(k.value for k in cls)
            raise ValueError(f"unknown model kind {value!r} (choose from {choices})") from None


_PARAM_NAMES = {
    ModelKind.CONSTANT_POISSON: ("mu",),
    ModelKind.EXP_AFFINE_POISSON: ("theta0", "theta1"),
    ModelKind.HAWKES_EXP: ("mu", "alpha", "beta"),
}

_ALIASES = {
    "poisson": "constant_poisson",
    "exp_affine": "exp_affine_poisson",
    "hawkes": "hawkes_exp",
}


@dataclass(frozen=True)
class ObservationWindow:
    """Observation interval ``[t_start, t_end]``; ``t_start`` is always 0."""

    t_start: float = 0.0
    t_end: float = 1.0

    def __post_init__(self):
        if self.t_start != 0.0:
            raise DomainError("observation windows start at 0")
        if not (math.isfinite(self.t_end) and self.t_end > self.t_start):
            raise DomainError(f"window end must be finite and > 0, got {self.t_end!r}")

    @property
    def length(self) -> float:
        return self.t_end - self.t_start


@dataclass(frozen=True, eq=False)
class EventSequence:
    """Strictly increasing event times inside ``(t_start, t_end]``.

    The origin ``t_0 = 0`` is implicit and never stored. ``times`` is a
    read-only float64 array.
    """

    times: np.ndarray
    window: ObservationWindow = field(default_factory=ObservationWindow)

    def __post_init__(self):
        t = np.array(self.times, dtype=np.float64).reshape(-1)
        if t.size:
            if not np.all(np.isfinite(t)):
                raise DomainError("event times must be finite")
            if np.any(np.diff(t) <= 0):
                raise DomainError("event times must be strictly increasing")
            if t[0] <= self.window.t_start or t[-1] > self.window.t_end:
                raise DomainError(
                    f"event times must lie in ({self.window.t_start}, {self.window.t_end}]"
                )
        t.flags.writeable = False
        object.__setattr__(self, "times", t)

    def __len__(self):
        return self.times.size

    def __eq__(self, other):
        if not isinstance(other, EventSequence):
            return NotImplemented
        return self.window == other.window and np.array_equal(self.times, other.times)

    def __repr__(self):
        return f"EventSequence(n={len(self)}, window=[{self.window.t_start}, {self.window.t_end}])"

    def before(self, t: float) -> np.ndarray:
        """Events strictly before ``t``."""
        return self.times[: np.searchsorted(self.times, t, side="left")]


@dataclass(frozen=True)
class ModelSpec:
    kind: ModelKind
    theta: tuple
    a_n: float = 1.0
    window: ObservationWindow = field(default_factory=ObservationWindow)

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind.parse(self.kind))
        object.__setattr__(self, "theta", tuple(float(v) for v in self.theta))
        object.__setattr__(self, "a_n", float(self.a_n))

    @classmethod
    def constant_poisson(cls, mu, a_n=1.0, window=None):
        return cls(ModelKind.CONSTANT_POISSON, (mu,), a_n, window or ObservationWindow())

    @classmethod
    def exp_affine_poisson(cls, theta0, theta1, a_n=1.0, window=None):
        return cls(ModelKind.EXP_AFFINE_POISSON, (theta0, theta1), a_n, window or ObservationWindow())

    @classmethod
    def hawkes(cls, mu, alpha, beta, window=None):
        return cls(ModelKind.HAWKES_EXP, (mu, alpha, beta), 1.0, window or ObservationWindow())

    @property
    def params(self) -> dict:
        return dict(zip(self.kind.param_names, self.theta))

    @property
    def branching_factor(self) -> float:
        if self.kind is not ModelKind.HAWKES_EXP:
            return 0.0
        _, alpha, beta = self.theta
        return alpha / beta

    def with_theta(self, theta) -> "ModelSpec":
        return ModelSpec(self.kind, tuple(theta), self.a_n, self.window)


@dataclass(frozen=True)
class ThetaDomain:
    """Box constraints used by the estimator.

    Coordinates are ``(mu,)`` for constant Poisson, ``(theta0, theta1)`` for
    exp-affine Poisson and ``(mu, rho, beta)`` for Hawkes, where
    ``rho = alpha / beta`` is the branching factor. Bounding ``rho < 1`` is
    how the stability constraint is enforced.
    """

    kind: ModelKind
    lower: tuple
    upper: tuple
    stability: bool = False

    def __post_init__(self):
        object.__setattr__(self, "kind", ModelKind.parse(self.kind))
        lo = tuple(float(v) for v in self.lower)
        hi = tuple(float(v) for v in self.upper)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        if len(lo) != len(self.kind.param_names) or len(hi) != len(lo):
            raise ValueError("bounds do not match the parameter dimension")
        for a, b in zip(lo, hi):
            if not (math.isfinite(a) and math.isfinite(b) and a < b):
                raise ValueError(f"invalid bound pair ({a}, {b})")
        if self.kind is ModelKind.HAWKES_EXP:
            if lo[0] <= 0 or lo[2] <= 0 or lo[1] <= 0 or hi[1] >= 1:
                raise ValueError("Hawkes bounds need mu, beta > 0 and 0 < rho < 1")
        elif self.kind is ModelKind.CONSTANT_POISSON and lo[0] <= 0:
            raise ValueError("rate lower bound must be positive")

    @classmethod
    def default(cls, kind) -> "ThetaDomain":
        kind = ModelKind.parse(kind)
        if kind is ModelKind.CONSTANT_POISSON:
            return cls(kind, (1e-3,), (1e6,))
        if kind is ModelKind.EXP_AFFINE_POISSON:
            return cls(kind, (-20.0, -20.0), (20.0, 20.0))
        return cls(kind, (1e-3, 1e-6, 1e-3), (1e6, 1 - 1e-6, 1e4), stability=True)

    def to_coords(self, theta) -> tuple:
        """Natural parameters to domain coordinates."""
        if self.kind is ModelKind.HAWKES_EXP:
            mu, alpha, beta = theta
            return (mu, alpha / beta, beta)
        return tuple(theta)

    def from_coords(self, coords) -> tuple:
        if self.kind is ModelKind.HAWKES_EXP:
            mu, rho, beta = coords
            return (mu, rho * beta, beta)
        return tuple(coords)

    def contains(self, theta, slack=1e-12) -> bool:
        c = self.to_coords(theta)
        return all(
            lo - slack * max(1.0, abs(lo)) <= v <= hi + slack * max(1.0, abs(hi))
            for v, lo, hi in zip(c, self.lower, self.upper)
        )


def validate(model: ModelSpec) -> list[str]:
    """Return every constraint the model violates (empty list means valid)."""
    out = []
    names = model.kind.param_names
    if len(model.theta) != len(names):
        return [f"{model.kind.value} expects {len(names)} parameters, got {len(model.theta)}"]
    if not all(math.isfinite(v) for v in model.theta):
        out.append("parameters must be finite")
    if not (math.isfinite(model.a_n) and model.a_n >= 1.0):
        out.append("scale a_n must be >= 1")
    if model.kind is ModelKind.CONSTANT_POISSON:
        if not model.theta[0] > 0:
            out.append("rate not positive")
    elif model.kind is ModelKind.HAWKES_EXP:
        mu, alpha, beta = model.theta
        if model.a_n != 1.0:
            out.append("Hawkes models carry their scale in mu; a_n must be 1")
        if not mu > 0:
            out.append("rate not positive")
        if not alpha >= 0:
            out.append("excitation amplitude alpha negative")
        if not beta > 0:
            out.append("decay beta not positive")
        if beta > 0 and not alpha / beta < 1:
            out.append("branching factor >= 1")
    return out


def check(model: ModelSpec) -> ModelSpec:
    violations = validate(model)
    if violations:
        raise ValidationError(violations)
    return model


def _check_time(model: ModelSpec, t: float):
    w = model.window
    if not (w.t_start <= t <= w.t_end):
        raise DomainError(f"time {t!r} outside window [{w.t_start}, {w.t_end}]")


def _history(history) -> np.ndarray:
    if history is None:
        return np.empty(0)
    if isinstance(history, EventSequence):
        return history.times
    return np.asarray(history, dtype=np.float64)


def _expm1_ratio(x):
    """``expm1(x) / x`` with the removable singularity at 0 filled in."""
    x = np.asarray(x, dtype=np.float64)
    with np.errstate(invalid="ignore", divide="ignore"):
        r = np.expm1(x) / x
    return np.where(x == 0.0, 1.0, r)


def intensity_at(model: ModelSpec, history, t: float) -> float:
    """Conditional intensity at ``t`` given events strictly before ``t``."""
    _check_time(model, t)
    th = model.theta
    if model.kind is ModelKind.CONSTANT_POISSON:
        return model.a_n * th[0]
    if model.kind is ModelKind.EXP_AFFINE_POISSON:
        return model.a_n * math.exp(th[0] + th[1] * t)
    mu, alpha, beta = th
    h = _history(history)
    past = h[h < t]
    return float(mu + alpha * np.exp(-beta * (t - past)).sum())


def compensator(model: ModelSpec, history, t: float) -> float:
    """Closed-form cumulative intensity ``Lambda(t)``."""
    _check_time(model, t)
    th = model.theta
    if model.kind is ModelKind.CONSTANT_POISSON:
        return model.a_n * th[0] * t
    if model.kind is ModelKind.EXP_AFFINE_POISSON:
        return float(model.a_n * math.exp(th[0]) * t * _expm1_ratio(th[1] * t))
    mu, alpha, beta = th
    h = _history(history)
    past = h[h < t]
    return float(mu * t - (alpha / beta) * np.expm1(-beta * (t - past)).sum())


def compensator_increments(model: ModelSpec, events: EventSequence) -> np.ndarray:
    """``Lambda(t_i) - Lambda(t_{i-1})`` for each event, with ``t_0 = 0``.

    Hawkes increments use an O(n) recursion on the decaying excitation.
    """
    t = events.times
    if t.size == 0:
        return np.empty(0)
    th = model.theta
    if model.kind is ModelKind.CONSTANT_POISSON:
        return model.a_n * th[0] * np.diff(t, prepend=0.0)
    if model.kind is ModelKind.EXP_AFFINE_POISSON:
        prev = np.concatenate(([0.0], t[:-1]))
        d = t - prev
        scale = model.a_n * math.exp(th[0])
        return scale * np.exp(th[1] * prev) * d * _expm1_ratio(th[1] * d)
    mu, alpha, beta = th
    return kernels.hawkes_increments(np.ascontiguousarray(t), mu, alpha, beta)


def inverse_compensator(model: ModelSpec, history, s: float) -> float:
    """Solve ``Lambda(t) = s`` for ``t``.

    Uses bisection-safeguarded Newton on ``[t_start, t_end]``. Returns
    ``math.inf`` when ``s`` exceeds ``Lambda(t_end)`` (the solution lies
    beyond the window).
    """
    if not s >= 0:
        raise DomainError(f"compensator value must be nonnegative, got {s!r}")
    if s == 0:
        return 0.0
    h = _history(history)
    lo, hi = model.window.t_start, model.window.t_end
    f_hi = compensator(model, h, hi) - s
    if f_hi < 0:
        return math.inf
    tol = INVERSE_RTOL * max(1.0, s)
    if abs(f_hi) <= tol:
        return hi
    # initial guess from the average rate over the window
    t = min(hi, max(lo, hi * s / (f_hi + s)))
    for _ in range(INVERSE_MAXITER):
        f = compensator(model, h, t) - s
        if abs(f) <= tol:
            return t
        if f < 0:
            lo = t
        else:
            hi = t
        lam = intensity_at(model, h, t)
        step = t - f / lam if lam > 0 else math.nan
        t = step if lo < step < hi else 0.5 * (lo + hi)
        if hi - lo <= 4 * np.spacing(hi):
            return t
    raise InvariantViolation(f"compensator inversion did not converge for s={s!r}")


def inverse_compensator_array(model: ModelSpec, s: Sequence[float]) -> np.ndarray:
    """Vectorised inversion for Poisson kinds (no history dependence).

    Same safeguarded Newton scheme as :func:`inverse_compensator`, run on all
    targets at once. Entries beyond the window come back as ``inf``.
    """
    s = np.asarray(s, dtype=np.float64)
    if model.kind is ModelKind.HAWKES_EXP:
        return np.array([inverse_compensator(model, None, v) for v in s])
    if np.any(s < 0):
        raise DomainError("compensator values must be nonnegative")
    out = np.full(s.shape, np.inf)
    t_end = model.window.t_end
    total = compensator(model, None, t_end)
    ok = s <= total
    if not np.any(ok):
        return out
    target = s[ok]
    lo = np.zeros_like(target)
    hi = np.full_like(target, t_end)
    t = t_end * target / total
    tol = INVERSE_RTOL * np.maximum(1.0, target)
    done = target == 0
    t[done] = 0.0
    th = model.theta
    a = model.a_n
    for _ in range(INVERSE_MAXITER):
        if model.kind is ModelKind.CONSTANT_POISSON:
            lam = np.full_like(t, a * th[0])
            f = lam * t - target
        else:
            lam = a * np.exp(th[0] + th[1] * t)
            f = a * math.exp(th[0]) * t * _expm1_ratio(th[1] * t) - target
        done |= np.abs(f) <= tol
        done |= (hi - lo) <= 4 * np.spacing(hi)
        if done.all():
            break
        lo = np.where(~done & (f < 0), t, lo)
        hi = np.where(~done & (f > 0), t, hi)
        step = t - f / lam
        inside = (step > lo) & (step < hi)
        t = np.where(done, t, np.where(inside, step, 0.5 * (lo + hi)))
    else:
        raise InvariantViolation("vectorised compensator inversion did not converge")
    out[ok] = t
    return out


def expected_count(model: ModelSpec) -> float:
    """Expected number of events on the window.

    For Hawkes models the mean intensity solves
    ``eta(t) = mu + int_0^t alpha exp(-beta (t - u)) eta(u) du``, whose
    solution is ``eta(t) = m + (mu - m) exp(-(beta - alpha) t)`` with
    ``m = mu beta / (beta - alpha)``.
    """
    t_end = model.window.t_end
    if model.kind.is_poisson:
        return compensator(model, None, t_end)
    mu, alpha, beta = model.theta
    k = beta - alpha
    m = mu * beta / k
    return m * t_end + (mu - m) * t_end * float(_expm1_ratio(-k * t_end))
