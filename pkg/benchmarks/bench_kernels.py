"""Compare the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--n 2000] [--repeat 5]

Times the three hot loops on a simulated Hawkes path plus one end-to-end
Hawkes fit and a small bootstrap test, each under both backends.
"""
import argparse
import contextlib
import time
import timeit

import numpy as np

from hawkes_gof import _pycore, kernels
from hawkes_gof.estimate import fit_mle
from hawkes_gof.gof import bootstrap_test
from hawkes_gof.models import ModelSpec
from hawkes_gof.simulate import RngStream, sample

try:
    from hawkes_gof import _core
except ImportError:
    _core = None

NAMES = ("hawkes_increments", "hawkes_loglik_grad", "hawkes_thin")


@contextlib.contextmanager
def backend(impl):
    saved = {n: getattr(kernels, n) for n in NAMES}
    for n in NAMES:
        setattr(kernels, n, getattr(impl, n))
    try:
        yield
    finally:
        for n, f in saved.items():
            setattr(kernels, n, f)


def best_of(fn, repeat, number=1):
    return min(timeit.repeat(fn, repeat=repeat, number=number)) / number


def kernel_cases(impl, t, theta, repeat):
    mu, alpha, beta = theta
    gen = np.random.default_rng(0)
    exps = gen.standard_exponential(4 * t.size)
    us = gen.random(4 * t.size)
    out = np.empty(4 * t.size)
    return {
        "increments": best_of(lambda: impl.hawkes_increments(t, mu, alpha, beta), repeat, 20),
        "loglik_grad": best_of(lambda: impl.hawkes_loglik_grad(t, 1.0, mu, alpha, beta), repeat, 20),
        "thinning": best_of(lambda: impl.hawkes_thin(mu, alpha, beta, 1.0, 0.0, 0.0, -np.inf,
                                                     exps, us, out, 0), repeat, 20),
    }


def pipeline_cases(impl, events, repeat):
    with backend(impl):
        return {
            "fit (5 starts)": best_of(lambda: fit_mle("hawkes", events, rng=RngStream(1)), repeat),
            "bootstrap B=19": best_of(lambda: bootstrap_test("hawkes", events, B=19, rng=RngStream(1)), 1),
        }


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--n", type=int, default=2000, help="target events on [0, 1]")
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    rho, beta = 0.5, 80.0
    theta = (args.n * (1 - rho), rho * beta, beta)
    events = sample(ModelSpec.hawkes(*theta), RngStream(42))
    t = np.ascontiguousarray(events.times)
    print(f"{len(events)} events, theta = ({theta[0]:g}, {theta[1]:g}, {theta[2]:g}), "
          f"active backend: {kernels.BACKEND}")

    impls = [("python", _pycore)] + ([("cython", _core)] if _core is not None else [])
    rows = {}
    for name, impl in impls:
        t0 = time.perf_counter()
        rows[name] = {**kernel_cases(impl, t, theta, args.repeat),
                      **pipeline_cases(impl, events, max(1, args.repeat // 2))}
        print(f"  {name} done in {time.perf_counter() - t0:.1f}s")

    print(f"\n{'case':<18}" + "".join(f"{n:>14}" for n, _ in impls) + ("     speed-up" if _core else ""))
    for case in rows["python"]:
        line = f"{case:<18}" + "".join(f"{rows[n][case] * 1e3:>12.3f}ms" for n, _ in impls)
        if _core is not None:
            line += f"{rows['python'][case] / rows['cython'][case]:>12.1f}x"
        print(line)
    if _core is None:
        print("\ncompiled extension not built; only the fallback was timed")


if __name__ == "__main__":
    main()
