"""The compiled kernels and the pure-Python fallback must agree."""
import json
import os
import subprocess
import sys

import numpy as np
import pytest

from hawkes_gof import _pycore, kernels

try:
    from hawkes_gof import _core
except ImportError:  # extension not built
    _core = None

needs_core = pytest.mark.skipif(_core is None, reason="compiled kernels not built")


def _cases(seed=7, count=20):
    gen = np.random.default_rng(seed)
    for _ in range(count):
        beta = gen.uniform(0.5, 300)
        n = int(gen.integers(0, 300))
        t = np.sort(gen.uniform(0, 1, n))
        yield t, gen.uniform(0.1, 80), gen.uniform(0, 0.95) * beta, beta


def test_backend_reported():
    assert kernels.BACKEND in ("cython", "python")


@needs_core
def test_increments_parity():
    for t, mu, a, b in _cases():
        np.testing.assert_allclose(_core.hawkes_increments(t, mu, a, b),
                                   _pycore.hawkes_increments(t, mu, a, b), rtol=1e-13, atol=0)


@needs_core
def test_loglik_grad_parity():
    for t, mu, a, b in _cases():
        np.testing.assert_allclose(_core.hawkes_loglik_grad(t, 1.0, mu, a, b),
                                   _pycore.hawkes_loglik_grad(t, 1.0, mu, a, b), rtol=1e-12)


def test_loglik_flags_nonpositive_intensity():
    t = np.array([0.2, 0.4])
    for impl in filter(None, (_core, _pycore)):
        ll = impl.hawkes_loglik_grad(t, 1.0, 0.0, 0.0, 1.0)[0]
        assert ll == -np.inf


@needs_core
def test_thinning_parity():
    gen = np.random.default_rng(3)
    exps = gen.standard_exponential(500)
    us = gen.random(500)
    a = _core.hawkes_thin(20.0, 15.0, 30.0, 1.0, 0.0, 0.0, -np.inf, exps, us, np.empty(400), 0)
    out_c = np.empty(400)
    out_p = np.empty(400)
    rc = _core.hawkes_thin(20.0, 15.0, 30.0, 1.0, 0.0, 0.0, -np.inf, exps, us, out_c, 0)
    rp = _pycore.hawkes_thin(20.0, 15.0, 30.0, 1.0, 0.0, 0.0, -np.inf, exps, us, out_p, 0)
    assert rc[0] == rp[0] == a[0]
    assert rc[4:] == rp[4:]
    np.testing.assert_allclose(out_c[: rc[0]], out_p[: rp[0]], rtol=1e-14)
    assert rc[6] == 0


def test_thinning_stops_when_output_full():
    exps = np.full(50, 0.01)
    us = np.zeros(50)  # always accept
    out = np.empty(3)
    n, t, excite, last, used, done, bad = _pycore.hawkes_thin(
        1.0, 0.5, 1.0, 100.0, 0.0, 0.0, -np.inf, exps, us, out, 0)
    assert (n, used, done) == (3, 3, False)
    assert last == out[2]


def test_env_override_selects_fallback():
    code = ("import json; from hawkes_gof import kernels, fit_mle, sample, ModelSpec, RngStream;"
            "ev = sample(ModelSpec.hawkes(50, 40, 80), RngStream(3));"
            "f = fit_mle('hawkes', ev, rng=RngStream(3));"
            "print(json.dumps([kernels.BACKEND, f.theta_hat, len(ev)]))")
    runs = {}
    for flag in ("1", "0"):
        env = {**os.environ, "HAWKES_GOF_PURE_PYTHON": flag}
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
        runs[flag] = json.loads(out.stdout)
    assert runs["1"][0] == "python"
    assert runs["0"][0] == ("cython" if _core is not None else "python")
    # same data, and the fits agree to optimizer tolerance
    assert runs["1"][2] == runs["0"][2]
    np.testing.assert_allclose(runs["1"][1], runs["0"][1], rtol=1e-6)
