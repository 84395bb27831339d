import math

import mpmath
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import special, stats

from hawkes_gof.exceptions import BootstrapDegenerateError, InsufficientEventsError
from hawkes_gof.gof import (
    QuadratureRule,
    WeightFunction,
    bootstrap_test,
    critical_value,
    empirical_laplace,
    gof_statistic,
    kolmogorov_sf,
    ks_exponential_test,
    reference_laplace,
    rescale,
    _p_value,
)
from hawkes_gof.estimate import fit_mle
from hawkes_gof.models import EventSequence, ModelKind, ModelSpec, ThetaDomain
from hawkes_gof.simulate import RngStream, sample


# --- Laplace transforms and statistic ------------------------------------------------

def test_laplace_examples():
    assert empirical_laplace([0.3, 2.0], 0.0) == 1.0
    assert empirical_laplace([math.log(2)], 1.0) == pytest.approx(0.5, abs=1e-15)
    assert empirical_laplace([1, 1, 1], 1.0) == pytest.approx(0.36787944117144233, abs=1e-15)
    np.testing.assert_allclose(reference_laplace([0, 1, 3]), [1, 0.5, 0.25])
    with pytest.raises(InsufficientEventsError):
        empirical_laplace([], 1.0)
    with pytest.raises(InsufficientEventsError):
        gof_statistic([])


def test_rescale_examples():
    ev = EventSequence([0.2, 0.7])
    np.testing.assert_allclose(rescale(ModelKind.CONSTANT_POISSON, (1.0,), ev), [0.2, 0.5])
    assert rescale("hawkes", (1, 0.5, 1), EventSequence([])).size == 0
    # a ModelSpec carries its own scale
    m = ModelSpec.constant_poisson(1.0, a_n=4)
    np.testing.assert_allclose(rescale(m, (1.0,), ev), [0.8, 2.0])


def test_single_increment_statistic_vs_high_precision_quadrature():
    mpmath.mp.dps = 30
    f = lambda u: (mpmath.exp(-u) - 1 / (1 + u)) ** 2 * mpmath.exp(-u)
    oracle = float(mpmath.sqrt(mpmath.quad(f, [0, 1, 10, mpmath.inf])))
    assert gof_statistic([1.0]) == pytest.approx(oracle, rel=1e-6)


def test_weight_scale_changes_statistic_consistently():
    mpmath.mp.dps = 30
    c = 2.5
    f = lambda u: (mpmath.exp(-0.7 * u) - 1 / (1 + u)) ** 2 * mpmath.exp(-c * u)
    oracle = float(mpmath.sqrt(mpmath.quad(f, [0, 1, 10, mpmath.inf])))
    quad = QuadratureRule.gauss_laguerre(64, WeightFunction(c))
    assert gof_statistic([0.7], quad) == pytest.approx(oracle, rel=1e-6)
    with pytest.raises(ValueError):
        WeightFunction(0.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0, 50), min_size=1, max_size=40), st.randoms(use_true_random=False))
def test_statistic_permutation_invariant(xs, r):
    ys = list(xs)
    r.shuffle(ys)
    assert gof_statistic(xs) == pytest.approx(gof_statistic(ys), rel=1e-12, abs=1e-15)


def test_gauss_laguerre_exactness():
    quad = QuadratureRule.gauss_laguerre(64)
    assert np.all(quad.nodes > 0) and np.all(quad.weights > 0)
    for k in range(0, 128):
        # int_0^inf u^k e^{-u} du = k!, computed in log space
        approx = math.fsum(np.exp(np.log(quad.weights) + k * np.log(quad.nodes)))
        assert approx == pytest.approx(math.factorial(k), rel=1e-12), k


def test_gauss_laguerre_scaled_weight():
    c = 3.0
    quad = QuadratureRule.gauss_laguerre(64, WeightFunction(c))
    for k in range(8):
        assert quad.integrate(lambda u: u**k) == pytest.approx(math.factorial(k) / c ** (k + 1), rel=1e-12)


def test_quadrature_order_stability():
    # datasets from each null family, rescaled under their own fitted model
    q64 = QuadratureRule.gauss_laguerre(64)
    q128 = QuadratureRule.gauss_laguerre(128)
    models = [ModelSpec.constant_poisson(30), ModelSpec.exp_affine_poisson(3.0, 1.0),
              ModelSpec.hawkes(50, 40, 80), ModelSpec.hawkes(20, 18, 20)]
    for r in range(100):
        m = models[r % len(models)]
        ev = sample(m, RngStream(40, r))
        fit = fit_mle(m.kind, ev, rng=RngStream(40, r))
        x = rescale(fit.model, fit.theta_hat, ev)
        a, b = gof_statistic(x, q64), gof_statistic(x, q128)
        assert abs(a - b) <= 1e-6 * b


def test_statistic_shrinks_with_sample_size():
    gen = np.random.default_rng(5)
    med = {n: np.median([gof_statistic(gen.exponential(size=n)) for _ in range(200)]) for n in (100, 1000)}
    assert med[1000] < med[100]
    assert med[100] / med[1000] == pytest.approx(math.sqrt(10), rel=0.3)


def test_true_theta_scaled_statistic_nondegenerate():
    iqr = {}
    for n in (100, 400):
        gen = np.random.default_rng(n)
        s = [math.sqrt(n) * gof_statistic(gen.exponential(size=n)) for _ in range(500)]
        q1, q3 = np.percentile(s, [25, 75])
        iqr[n] = q3 - q1
        assert iqr[n] > 0
    assert 0.5 <= iqr[100] / iqr[400] <= 2.0


# --- p-values and the decision rule --------------------------------------------------

def test_p_value_edges():
    s = np.array([0.1, 0.2, 0.3])
    assert _p_value(s, 1.0) == 0.25
    assert _p_value(s, 0.0) == 1.0
    assert _p_value(s, 0.2) == 0.75  # ties count as exceedances


@settings(max_examples=200, deadline=None)
@given(
    st.lists(st.integers(0, 30), min_size=1, max_size=60),
    st.integers(0, 31),
    st.sampled_from([0.01, 0.05, 0.1, 0.2, 0.5]),
)
def test_decision_rule_equivalence(boot, obs, level):
    # integer-valued statistics force plenty of ties
    stats_ = np.asarray(boot, float) / 7
    s = obs / 7
    p = _p_value(stats_, s)
    k = stats_.size + 1
    assert round(p * k) == 1 + np.sum(stats_ >= s)
    assert (p <= level) == (s > critical_value(stats_, level))


# --- bootstrap test ------------------------------------------------------------------

@pytest.fixture(scope="module")
def poisson_data():
    return sample(ModelSpec.constant_poisson(30), RngStream(7))


def test_bootstrap_result_shape(poisson_data):
    res = bootstrap_test("poisson", poisson_data, B=39, rng=RngStream(3))
    assert res.B == 39 and len(res.bootstrap_stats) == 39
    assert res.n_events == len(poisson_data)
    assert res.p_value in {(1 + k) / 40 for k in range(40)}
    assert res.reject == (res.p_value <= 0.05)
    assert res.theta_hat == (float(len(poisson_data)),)
    d = res.to_dict()
    assert d["B"] == 39 and d["theta_hat"] == {"mu": res.theta_hat[0]}


def test_bootstrap_deterministic_and_schedule_free(poisson_data):
    a = bootstrap_test("poisson", poisson_data, B=25, rng=RngStream(9))
    b = bootstrap_test("poisson", poisson_data, B=25, rng=RngStream(9))
    c = bootstrap_test("poisson", poisson_data, B=25, rng=RngStream(9), workers=2)
    assert a == b == c
    d = bootstrap_test("poisson", poisson_data, B=25, rng=RngStream(10))
    assert d.bootstrap_stats != a.bootstrap_stats


def test_bootstrap_hawkes_runs():
    ev = sample(ModelSpec.hawkes(50, 40, 80), RngStream(12))
    res = bootstrap_test("hawkes", ev, B=20, rng=RngStream(12))
    assert len(res.theta_hat) == 3 and 0 < res.p_value <= 1


def test_bootstrap_rejects_obvious_misfit():
    # strongly clustered data tested against a homogeneous Poisson null
    ev = sample(ModelSpec.hawkes(10, 90, 100), RngStream(2))
    res = bootstrap_test("poisson", ev, B=99, rng=RngStream(2))
    assert res.p_value == 0.01 and res.reject


def test_bootstrap_degenerate():
    # capping the rate leaves almost every bootstrap sample empty
    dom = ThetaDomain("poisson", (1e-6,), (0.01,))
    with pytest.raises(BootstrapDegenerateError):
        bootstrap_test("poisson", EventSequence([0.5]), B=40, domain=dom, rng=RngStream(1))


def test_bootstrap_observed_fit_failure():
    with pytest.raises(InsufficientEventsError):
        bootstrap_test("poisson", EventSequence([]), B=5)


def test_bootstrap_argument_checks(poisson_data):
    with pytest.raises(ValueError):
        bootstrap_test("poisson", poisson_data, B=0)
    with pytest.raises(ValueError):
        bootstrap_test("poisson", poisson_data, B=5, level=1.5)


# --- reference KS test -----------------------------------------------------------

def test_ks_single_point():
    d, p = ks_exponential_test([math.log(2)])
    assert d == pytest.approx(0.5, abs=1e-15)
    assert 0 < p <= 1
    with pytest.raises(InsufficientEventsError):
        ks_exponential_test([])


def test_ks_statistic_matches_scipy(rng):
    for _ in range(50):
        x = rng.exponential(rng.uniform(0.5, 2), int(rng.integers(1, 400)))
        assert ks_exponential_test(x)[0] == pytest.approx(stats.kstest(x, "expon").statistic, abs=1e-14)


def test_kolmogorov_sf_matches_scipy():
    for x in np.concatenate([np.linspace(0.05, 3.5, 200), [0.999999, 1.0, 1.000001]]):
        assert kolmogorov_sf(x) == pytest.approx(special.kolmogorov(x), abs=1e-11)
    assert kolmogorov_sf(0.0) == 1.0
    assert kolmogorov_sf(10.0) == 0.0 or kolmogorov_sf(10.0) < 1e-80


def test_ks_p_values_uniform_large_n():
    gen = np.random.default_rng(77)
    p = [ks_exponential_test(gen.exponential(size=1000))[1] for _ in range(400)]
    assert stats.kstest(p, "uniform").statistic < 0.08
