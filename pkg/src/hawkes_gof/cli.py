"""Command-line interface.

Subcommands: ``simulate``, ``fit``, ``test``, ``experiment``, ``smooth``.
Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys

from . import __version__, kernels
from .dataio import (
    WindowPolicy,
    atomic_write,
    curve_to_csv,
    emit,
    events_to_csv,
    ingest_events,
    load_run_config,
    read_event_times,
    replicates_to_csv,
    smooth_rate,
    table_to_csv,
    to_json,
)
from .estimate import fit_mle
from .exceptions import DataError, NumericalError
from .experiments import default_grid, grid_table, run_experiment, run_power, run_type1
from .gof import QuadratureRule, WeightFunction, bootstrap_test, ks_exponential_test, rescale
from .models import ModelKind, ModelSpec, ObservationWindow
from .parallel import WORKERS_ENV, resolve_workers
from .simulate import RngStream, sample

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3

log = logging.getLogger("hawkes_gof")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _kind(value):
    try:
        return ModelKind.parse(value)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc))


def _add_window(p):
    g = p.add_argument_group("window")
    g.add_argument("--origin", type=float, default=0.0, help="time origin of the record")
    g.add_argument("--end", type=float, default=None, help="end of observation (default: last event)")
    g.add_argument("--cut", type=float, default=0.0,
                   help="drop events within this span after the origin")


def _add_out(p):
    p.add_argument("-o", "--out", default=None, help="output file (default: stdout)")


def build_parser():
    parser = _Parser(prog="hawkes-gof", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("simulate", help="simulate events from a model")
    p.add_argument("--kind", type=_kind, required=True)
    for name in ("mu", "alpha", "beta", "theta0", "theta1"):
        p.add_argument(f"--{name}", type=float)
    p.add_argument("--a-n", type=float, default=1.0)
    p.add_argument("--t-end", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--stream", type=int, default=0)
    _add_out(p)

    p = sub.add_parser("fit", help="maximum-likelihood fit")
    p.add_argument("events")
    p.add_argument("--kind", type=_kind, required=True)
    p.add_argument("--a-n", type=float, default=1.0)
    p.add_argument("--seed", type=int, default=0)
    _add_window(p)
    _add_out(p)

    p = sub.add_parser("test", help="bootstrap goodness-of-fit test")
    p.add_argument("events")
    p.add_argument("--null", type=_kind, required=True)
    p.add_argument("-B", type=int, default=199)
    p.add_argument("--level", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--a-n", type=float, default=1.0)
    p.add_argument("--quad-order", type=int, default=64)
    p.add_argument("--weight-scale", type=float, default=1.0)
    p.add_argument("--reference", action="store_true", help="also run the plug-in KS test")
    p.add_argument("--workers", type=int, default=None)
    _add_window(p)
    _add_out(p)

    p = sub.add_parser("experiment", help="Monte Carlo size/power study")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--config", help="flat JSON run config")
    src.add_argument("--grid", choices=("fig1", "fig2", "fig3"), help="representative grid")
    p.add_argument("--M", type=int, default=200, help="replicates (grid mode)")
    p.add_argument("-B", type=int, default=199, help="bootstrap size (grid mode)")
    p.add_argument("--seed", type=int, default=0, help="seed (grid mode)")
    p.add_argument("--workers", type=int, default=None)
    p.add_argument("--out-dir", default=None)

    p = sub.add_parser("smooth", help="Gaussian-kernel rate curve")
    p.add_argument("events")
    p.add_argument("--sigma", type=float, required=True)
    p.add_argument("--grid", type=int, default=512)
    p.add_argument("--start", type=float, default=None)
    p.add_argument("--end", type=float, default=None)
    _add_out(p)
    return parser


def _policy(args):
    return WindowPolicy(origin=args.origin, end=args.end, cut=args.cut)


def cmd_simulate(args):
    values = {n: getattr(args, n) for n in args.kind.param_names}
    missing = [n for n, v in values.items() if v is None]
    if missing:
        raise UsageError(f"simulate --kind {args.kind.value} needs --{' --'.join(missing)}")
    window = ObservationWindow(0.0, args.t_end)
    a_n = 1.0 if args.kind is ModelKind.HAWKES_EXP else args.a_n
    model = ModelSpec(args.kind, list(values.values()), a_n, window)
    events = sample(model, RngStream(args.seed, args.stream))
    emit(events_to_csv(events.times), args.out)


def cmd_fit(args):
    events, amap = ingest_events(args.events, _policy(args))
    fit = fit_mle(args.kind, events, rng=RngStream(args.seed), a_n=args.a_n)
    emit(to_json({**fit.to_dict(), "affine_map": amap.to_dict()}), args.out)


def cmd_test(args):
    events, amap = ingest_events(args.events, _policy(args))
    quad = QuadratureRule.gauss_laguerre(args.quad_order, WeightFunction(args.weight_scale))
    res = bootstrap_test(args.null, events, args.B, args.level, quad, rng=RngStream(args.seed),
                         a_n=args.a_n, workers=resolve_workers(args.workers))
    out = res.to_dict()
    out["seed"] = args.seed
    out["affine_map"] = amap.to_dict()
    out["reference"] = None
    if args.reference:
        model = ModelSpec(args.null, res.theta_hat, 1.0 if args.null is ModelKind.HAWKES_EXP else args.a_n,
                          events.window)
        d, p = ks_exponential_test(rescale(model, res.theta_hat, events))
        out["reference"] = {"statistic": d, "p_value": p, "reject": p <= args.level}
    emit(to_json(out), args.out)


def cmd_experiment(args):
    if args.grid:
        configs = default_grid(args.grid, M=args.M, B=args.B, seed=args.seed)
        out_dir = args.out_dir or "."
        workers = resolve_workers(args.workers)
        reports = [run_experiment(c, workers) for c in configs]
        rows = grid_table(reports)
        atomic_write(os.path.join(out_dir, f"{args.grid}_grid.csv"), table_to_csv(rows))
        atomic_write(os.path.join(out_dir, f"{args.grid}_grid.json"),
                     to_json({"grid": args.grid, "representative": True, "rows": rows}))
        return
    config, io = load_run_config(args.config)
    # precedence: --workers, then the environment, then the config file
    workers = args.workers
    if workers is None and not os.environ.get(WORKERS_ENV):
        workers = io["workers"]
    workers = resolve_workers(workers)
    out_dir = args.out_dir or io["out_dir"] or "."
    if io["mode"] == "type1":
        report = run_type1(config, workers)
    elif io["mode"] == "power":
        report = run_power(config, workers)
    else:
        report = run_experiment(config, workers)
    atomic_write(os.path.join(out_dir, "report.json"), to_json(report.to_dict()))
    atomic_write(os.path.join(out_dir, "replicates.csv"), replicates_to_csv(report.per_replicate))
    log.info("bootstrap rejection rate %.4f (se %.4f)", report.rejection_rate_bootstrap,
             report.binomial_se)


def cmd_smooth(args):
    times = read_event_times(args.events)
    window = None
    if args.start is not None or args.end is not None:
        lo = args.start if args.start is not None else min(0.0, float(times.min()) if times.size else 0.0)
        hi = args.end if args.end is not None else (float(times.max()) if times.size else 1.0)
        window = (lo, hi)
    curve = smooth_rate(times, args.sigma, args.grid, window)
    emit(curve_to_csv(curve), args.out)


COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "test": cmd_test,
    "experiment": cmd_experiment,
    "smooth": cmd_smooth,
}


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return EXIT_OK if not exc.code else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    log.debug("kernel backend: %s", kernels.BACKEND)
    try:
        COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"hawkes-gof {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalError as exc:
        print(f"hawkes-gof {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DataError, ValueError, OSError) as exc:
        print(f"hawkes-gof {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    return EXIT_OK


run_cli = main

if __name__ == "__main__":
    sys.exit(main())
