"""Monte Carlo harness for size (type I error) and power studies.

Each replicate ``r`` simulates a data set from the generator on stream
``r << 20``, runs the bootstrap test (bootstrap draw ``b`` on stream
``(r << 20) | b``) and, optionally, the plug-in KS reference test on the
same fitted increments. Replicates are independent jobs; records are
gathered by index, so the output is identical for any worker count.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field

from . import kernels
from .exceptions import BootstrapDegenerateError, InsufficientEventsError
from .gof import QuadratureRule, WeightFunction, bootstrap_test, ks_exponential_test, rescale
from .models import ModelKind, ModelSpec, check, expected_count
from .parallel import pmap
from .simulate import BOOTSTRAP_BITS, RngStream, sample

log = logging.getLogger(__name__)

__all__ = [
    "ExperimentConfig",
    "ReplicateRecord",
    "ExperimentReport",
    "run_type1",
    "run_power",
    "run_experiment",
    "run_grid",
    "grid_table",
    "default_grid",
    "STREAM_ID_FORMULA",
]

STREAM_ID_FORMULA = f"data: r << {BOOTSTRAP_BITS}; bootstrap b: (r << {BOOTSTRAP_BITS}) | b"


@dataclass(frozen=True)
class ExperimentConfig:
    generator: ModelSpec
    null_model_kind: ModelKind
    M: int = 200
    B: int = 199
    level: float = 0.05
    seed: int = 0
    weight_scale: float = 1.0
    quad_order: int = 64
    run_reference_test: bool = True
    null_a_n: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "null_model_kind", ModelKind.parse(self.null_model_kind))
        if self.M < 1:
            raise ValueError("M must be >= 1")
        if self.B < 1:
            raise ValueError("B must be >= 1")
        if not 0 < self.level < 1:
            raise ValueError("level must lie in (0, 1)")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit value")
        if self.M >= 1 << (64 - BOOTSTRAP_BITS):
            raise ValueError("too many replicates for the stream-id layout")
        if self.B >= 1 << BOOTSTRAP_BITS:
            raise ValueError(f"B must be below 2**{BOOTSTRAP_BITS}")
        WeightFunction(self.weight_scale)
        check(self.generator)

    @property
    def resolved_null_a_n(self) -> float:
        if self.null_a_n is not None:
            return float(self.null_a_n)
        if self.null_model_kind.is_poisson and self.generator.kind.is_poisson:
            return self.generator.a_n
        return 1.0

    @property
    def generator_in_null(self) -> bool:
        """True when the generator belongs to the null family."""
        g = self.generator
        if g.kind is self.null_model_kind:
            return True
        # constant-rate Poisson sits inside every family: Hawkes with alpha = 0,
        # exp-affine with theta1 = 0
        return (g.kind is ModelKind.CONSTANT_POISSON
                or (g.kind is ModelKind.HAWKES_EXP and g.theta[1] == 0)
                or (g.kind is ModelKind.EXP_AFFINE_POISSON and g.theta[1] == 0))

    def to_dict(self) -> dict:
        g = self.generator
        d = {
            "generator.kind": g.kind.value,
            **{f"generator.{k}": v for k, v in g.params.items()},
            "generator.a_n": g.a_n,
            "generator.t_end": g.window.t_end,
            "null_model": self.null_model_kind.value,
            "M": self.M,
            "B": self.B,
            "level": self.level,
            "seed": self.seed,
            "weight_scale": self.weight_scale,
            "quad_order": self.quad_order,
            "run_reference_test": self.run_reference_test,
        }
        if self.null_a_n is not None:
            d["null_a_n"] = self.null_a_n
        return d


@dataclass(frozen=True)
class ReplicateRecord:
    replicate: int
    stream_id: int
    seed: int
    n_events: int
    status: str
    fit_converged: bool
    statistic: float
    p_boot: float
    reject_boot: bool
    bootstrap_nonconverged: int
    bootstrap_skipped: int
    ks_stat: float
    p_ref: float
    reject_ref: bool

    FIELDS = (
        "replicate", "stream_id", "seed", "n_events", "status", "fit_converged",
        "statistic", "p_boot", "reject_boot", "bootstrap_nonconverged",
        "bootstrap_skipped", "ks_stat", "p_ref", "reject_ref",
    )


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    mode: str
    rejection_rate_bootstrap: float
    rejection_rate_reference: float | None
    binomial_se: float
    binomial_se_reference: float | None
    per_replicate: list = field(default_factory=list)
    wall_time: float = 0.0
    backend: str = kernels.BACKEND

    @property
    def n_fit_failures(self) -> int:
        return sum(r.status != "ok" for r in self.per_replicate)

    @property
    def n_nonconverged_fits(self) -> int:
        return sum(not r.fit_converged for r in self.per_replicate)

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "config": self.config.to_dict(),
            "M": len(self.per_replicate),
            "rejection_rate_bootstrap": self.rejection_rate_bootstrap,
            "rejection_rate_reference": self.rejection_rate_reference,
            "binomial_se": self.binomial_se,
            "binomial_se_reference": self.binomial_se_reference,
            "n_failed_replicates": self.n_fit_failures,
            "n_nonconverged_fits": self.n_nonconverged_fits,
            "stream_id_formula": STREAM_ID_FORMULA,
            "backend": self.backend,
            "wall_time": self.wall_time,
            "per_replicate": [asdict(r) for r in self.per_replicate],
        }


def _binomial_se(p: float, m: int) -> float:
    return math.sqrt(p * (1.0 - p) / m)


def _replicate(job) -> ReplicateRecord:
    config, r = job
    stream = RngStream(config.seed, r << BOOTSTRAP_BITS)
    events = sample(config.generator, stream)
    quad = QuadratureRule.gauss_laguerre(config.quad_order, WeightFunction(config.weight_scale))
    nan = math.nan
    base = dict(replicate=r, stream_id=stream.stream_id, seed=config.seed, n_events=len(events))
    a_n = config.resolved_null_a_n
    try:
        res = bootstrap_test(config.null_model_kind, events, config.B, config.level, quad,
                             rng=stream, a_n=a_n, workers=1)
    except (InsufficientEventsError, BootstrapDegenerateError) as exc:
        status = "fit_failed" if isinstance(exc, InsufficientEventsError) else "bootstrap_degenerate"
        return ReplicateRecord(**base, status=status, fit_converged=False, statistic=nan,
                               p_boot=nan, reject_boot=False, bootstrap_nonconverged=0,
                               bootstrap_skipped=0, ks_stat=nan, p_ref=nan, reject_ref=False)
    ks_stat = p_ref = nan
    reject_ref = False
    if config.run_reference_test:
        # same fit the bootstrap used: the observed fit is deterministic in the stream
        fitted = ModelSpec(config.null_model_kind, res.theta_hat, a_n, events.window)
        ks_stat, p_ref = ks_exponential_test(rescale(fitted, res.theta_hat, events))
        reject_ref = p_ref <= config.level
    return ReplicateRecord(**base, status="ok", fit_converged=res.fit_converged,
                           statistic=res.statistic, p_boot=res.p_value, reject_boot=res.reject,
                           bootstrap_nonconverged=res.bootstrap_nonconverged,
                           bootstrap_skipped=res.bootstrap_skipped, ks_stat=ks_stat,
                           p_ref=p_ref, reject_ref=reject_ref)


def run_experiment(config: ExperimentConfig, workers=None, mode=None) -> ExperimentReport:
    """Run ``config.M`` replicates and aggregate rejection rates."""
    mode = mode or ("type1" if config.generator_in_null else "power")
    t0 = time.perf_counter()
    log.info("running %s experiment: M=%d B=%d", mode, config.M, config.B)
    records = pmap(_replicate, [(config, r) for r in range(config.M)], workers)
    m = len(records)
    rate = sum(r.reject_boot for r in records) / m
    rate_ref = se_ref = None
    if config.run_reference_test:
        rate_ref = sum(r.reject_ref for r in records) / m
        se_ref = _binomial_se(rate_ref, m)
    return ExperimentReport(
        config=config,
        mode=mode,
        rejection_rate_bootstrap=rate,
        rejection_rate_reference=rate_ref,
        binomial_se=_binomial_se(rate, m),
        binomial_se_reference=se_ref,
        per_replicate=records,
        wall_time=time.perf_counter() - t0,
    )


def run_type1(config: ExperimentConfig, workers=None) -> ExperimentReport:
    """Size study: data generated under the null family."""
    if config.generator.kind is not config.null_model_kind:
        raise ValueError("type I runs need the generator kind to equal the null kind")
    return run_experiment(config, workers, "type1")


def run_power(config: ExperimentConfig, workers=None) -> ExperimentReport:
    """Power study: data generated outside the null family."""
    if config.generator_in_null:
        raise ValueError(
            f"generator {config.generator.kind.value} {config.generator.params} lies in the "
            f"null family {config.null_model_kind.value}; use run_type1"
        )
    return run_experiment(config, workers, "power")


def run_grid(configs, workers=None) -> list[ExperimentReport]:
    return [run_experiment(c, workers) for c in configs]


def grid_table(reports) -> list[dict]:
    """One row per configuration, keyed by its parameters."""
    rows = []
    for rep in reports:
        g = rep.config.generator
        row = {
            "mode": rep.mode,
            "generator": g.kind.value,
            **{k: g.params.get(k, "") for k in ("mu", "alpha", "beta", "theta0", "theta1")},
            "branching": g.branching_factor,
            "a_n": g.a_n,
            "expected_events": expected_count(g),
            "null_model": rep.config.null_model_kind.value,
            "M": rep.config.M,
            "B": rep.config.B,
            "rejection_rate_bootstrap": rep.rejection_rate_bootstrap,
            "binomial_se": rep.binomial_se,
            "rejection_rate_reference": rep.rejection_rate_reference,
            "binomial_se_reference": rep.binomial_se_reference,
        }
        rows.append(row)
    return rows


def _hawkes_for_count(target, alpha, rho):
    """Hawkes generator with given alpha and branching, tuned to ``target`` events."""
    beta = alpha / rho
    unit = expected_count(ModelSpec.hawkes(1.0, alpha, beta))
    return ModelSpec.hawkes(target / unit, alpha, beta)


def default_grid(name: str, M: int = 200, B: int = 199, seed: int = 0, level: float = 0.05):
    """Representative parameter grids shaped like the three simulation panels.

    These are illustrative grids, not the exact published axis values.

    ``fig1``  constant-rate Poisson, size, six expected counts.
    ``fig2``  Hawkes, size, mu and branching fixed per panel, alpha varied.
    ``fig3``  Hawkes data against a Poisson null, power over alpha and branching.
    """
    def cfg(gen, null):
        return ExperimentConfig(gen, null, M=M, B=B, level=level, seed=seed)

    if name == "fig1":
        return [cfg(ModelSpec.constant_poisson(mu), ModelKind.CONSTANT_POISSON)
                for mu in (30, 50, 100, 200, 500, 1000)]
    if name == "fig2":
        out = []
        for mu, rho in ((50.0, 0.25), (50.0, 0.5)):
            for alpha in (5.0, 10.0, 20.0, 40.0):
                out.append(cfg(ModelSpec.hawkes(mu, alpha, alpha / rho), ModelKind.HAWKES_EXP))
        return out
    if name == "fig3":
        return [cfg(_hawkes_for_count(100.0, alpha, rho), ModelKind.CONSTANT_POISSON)
                for rho in (0.3, 0.6, 0.9) for alpha in (5.0, 10.0, 20.0, 45.0, 90.0)]
    raise ValueError(f"unknown grid {name!r} (choose fig1, fig2 or fig3)")
