"""Event-file ingestion, rate smoothing and result serialization.

File formats
------------
events CSV
    One event time per row, optionally preceded by a single ``time`` header.
curve CSV
    Header ``t,rate``.
run config
    A flat JSON object; keys are listed in :data:`CONFIG_KEYS`.

Floats are written with 17 significant digits so that a write/read cycle
reproduces every double exactly. All writes go through a temporary file and
an atomic rename.
"""
from __future__ import annotations

import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass

import numpy as np

from .exceptions import DataError
from .experiments import ExperimentConfig, ReplicateRecord
from .models import EventSequence, ModelKind, ModelSpec, ObservationWindow

__all__ = [
    "AffineMap",
    "WindowPolicy",
    "read_event_times",
    "ingest_events",
    "format_float",
    "events_to_csv",
    "write_events",
    "smooth_rate",
    "curve_to_csv",
    "atomic_write",
    "to_json",
    "load_run_config",
    "replicates_to_csv",
    "CONFIG_KEYS",
]


@dataclass(frozen=True)
class AffineMap:
    """``unit = (original - offset) / scale``."""

    offset: float = 0.0
    scale: float = 1.0

    def forward(self, t):
        return (np.asarray(t, dtype=np.float64) - self.offset) / self.scale

    def inverse(self, u):
        return np.asarray(u, dtype=np.float64) * self.scale + self.offset

    def to_dict(self) -> dict:
        return {"offset": self.offset, "scale": self.scale}


@dataclass(frozen=True)
class WindowPolicy:
    """How raw event times are placed on the unit window.

    Events in ``[origin, origin + cut]`` are dropped when ``cut > 0``; the
    remaining span ``(origin + cut, end]`` is mapped affinely onto ``(0, 1]``.
    ``end`` defaults to the last event time.
    """

    origin: float = 0.0
    end: float | None = None
    cut: float = 0.0


def read_event_times(path) -> np.ndarray:
    """Parse an events CSV into a sorted array.

    Raises
    ------
    DataError
        On unparsable rows or duplicate times; the message names the rows
        (1-based line numbers).
    """
    try:
        with open(path, newline="") as fh:
            lines = fh.read().splitlines()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc
    values, rows, bad = [], [], []
    for lineno, line in enumerate(lines, start=1):
        cell = line.strip()
        if not cell:
            continue
        if lineno == 1 and cell.lower() == "time":
            continue
        try:
            v = float(cell)
        except ValueError:
            bad.append(lineno)
            continue
        if not math.isfinite(v):
            bad.append(lineno)
            continue
        values.append(v)
        rows.append(lineno)
    if bad:
        raise DataError(f"{path}: unparsable event time on row(s) {', '.join(map(str, bad))}")
    times = np.array(values, dtype=np.float64)
    rows = np.array(rows)
    order = np.argsort(times, kind="stable")
    times, rows = times[order], rows[order]
    dup = np.flatnonzero(np.diff(times) == 0)
    if dup.size:
        pairs = sorted({int(r) for i in dup for r in (rows[i], rows[i + 1])})
        raise DataError(f"{path}: duplicate event times on row(s) {', '.join(map(str, pairs))}")
    return times


def ingest_events(source, policy: WindowPolicy | None = None) -> tuple[EventSequence, AffineMap]:
    """Load events (a path or an array of raw times) onto the unit window."""
    policy = policy or WindowPolicy()
    if isinstance(source, (str, os.PathLike)):
        raw = read_event_times(source)
    else:
        raw = np.sort(np.asarray(source, dtype=np.float64))
        if np.any(np.diff(raw) == 0):
            raise DataError("duplicate event times")
    if policy.cut < 0:
        raise DataError("exclusion length must be nonnegative")
    if raw.size and raw[0] < policy.origin:
        raise DataError(f"event at {raw[0]!r} precedes the origin {policy.origin!r}")
    lower = policy.origin + policy.cut
    if policy.cut > 0:
        raw = raw[raw > lower]
    if raw.size == 0:
        raise DataError("no events left after exclusion")
    if raw[0] <= lower:
        raise DataError("an event sits exactly on the origin; set a cut or move the origin")
    end = float(raw[-1]) if policy.end is None else float(policy.end)
    if end <= lower:
        raise DataError("window end must exceed the origin plus the cut")
    if raw[-1] > end:
        raise DataError(f"event at {raw[-1]!r} lies beyond the window end {end!r}")
    amap = AffineMap(offset=lower, scale=end - lower)
    unit = amap.forward(raw)
    # rounding can nudge the last point past 1
    unit = np.minimum(unit, 1.0)
    try:
        return EventSequence(unit, ObservationWindow(0.0, 1.0)), amap
    except ValueError as exc:
        raise DataError(f"events collapse after rescaling: {exc}") from exc


def format_float(x) -> str:
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def events_to_csv(times) -> str:
    return "time\n" + "".join(format_float(t) + "\n" for t in np.asarray(times).tolist())


def atomic_write(path, text: str):
    path = os.fspath(path)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_events(path, times):
    atomic_write(path, events_to_csv(times))


def smooth_rate(events, sigma: float, grid: int = 512, window=None) -> np.ndarray:
    """Gaussian-kernel occurrence rate on an even grid.

    Returns an array of shape ``(grid, 2)`` holding ``(t, rate)`` pairs.
    ``events`` may be an :class:`EventSequence` or raw times; ``window``
    defaults to the sequence window, or ``[min(0, t_1), t_n]`` for raw times.
    """
    if not sigma > 0:
        raise ValueError("bandwidth sigma must be positive")
    if grid < 2:
        raise ValueError("grid needs at least two points")
    if isinstance(events, EventSequence):
        t = events.times
        lo, hi = window or (events.window.t_start, events.window.t_end)
    else:
        t = np.asarray(events, dtype=np.float64)
        if window is None:
            lo = min(0.0, float(t.min())) if t.size else 0.0
            hi = float(t.max()) if t.size else 1.0
        else:
            lo, hi = window
    x = np.linspace(lo, hi, grid)
    rate = np.zeros(grid)
    norm = 1.0 / (sigma * math.sqrt(2.0 * math.pi))
    for start in range(0, t.size, 4096):
        chunk = t[start:start + 4096]
        z = (x[:, None] - chunk[None, :]) / sigma
        rate += norm * np.exp(-0.5 * z * z).sum(axis=1)
    return np.column_stack((x, rate))


def curve_to_csv(curve) -> str:
    return "t,rate\n" + "".join(f"{format_float(a)},{format_float(b)}\n" for a, b in curve)


def _clean(obj):
    if isinstance(obj, float):
        return obj if math.isfinite(obj) else None
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def to_json(obj) -> str:
    """JSON text with non-finite floats mapped to ``null``."""
    return json.dumps(_clean(obj), indent=2, allow_nan=False) + "\n"


def emit(text: str, path=None):
    if path is None or path == "-":
        sys.stdout.write(text)
    else:
        atomic_write(path, text)


# --- run configuration --------------------------------------------------------

_NUM = (int, float)
CONFIG_KEYS = {
    "generator.kind": str,
    "generator.mu": _NUM,
    "generator.alpha": _NUM,
    "generator.beta": _NUM,
    "generator.theta0": _NUM,
    "generator.theta1": _NUM,
    "generator.a_n": _NUM,
    "generator.t_end": _NUM,
    "null_model": str,
    "null_a_n": _NUM,
    "M": int,
    "B": int,
    "level": _NUM,
    "seed": int,
    "weight_scale": _NUM,
    "quad_order": int,
    "run_reference_test": bool,
    "workers": int,
    "out_dir": str,
    "mode": str,
}
_REQUIRED = ("generator.kind", "null_model", "M", "B", "level", "seed")


def load_run_config(path) -> tuple[ExperimentConfig, dict]:
    """Parse a flat JSON run config.

    Returns the experiment config plus the I/O settings (``workers``,
    ``out_dir``, ``mode``; absent keys map to ``None``).
    """
    try:
        with open(path) as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise DataError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(raw, dict):
        raise DataError(f"{path}: config must be a JSON object")
    unknown = sorted(set(raw) - set(CONFIG_KEYS))
    if unknown:
        raise DataError(f"{path}: unknown config key(s): {', '.join(unknown)}")
    for key, value in raw.items():
        want = CONFIG_KEYS[key]
        ok = isinstance(value, want) and not (want is not bool and isinstance(value, bool))
        if not ok:
            raise DataError(f"{path}: key {key!r} has the wrong type")
    try:
        kind = ModelKind.parse(raw.get("generator.kind", ""))
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
    names = kind.param_names
    missing = [k for k in _REQUIRED if k not in raw]
    missing += [f"generator.{p}" for p in names if f"generator.{p}" not in raw]
    if missing:
        raise DataError(f"{path}: missing config key(s): {', '.join(missing)}")
    stray = [k for k in raw if k.startswith("generator.") and k.split(".", 1)[1] in
             ("mu", "alpha", "beta", "theta0", "theta1") and k.split(".", 1)[1] not in names]
    if stray:
        raise DataError(f"{path}: parameter(s) {', '.join(stray)} do not apply to {kind.value}")
    window = ObservationWindow(0.0, float(raw.get("generator.t_end", 1.0)))
    gen = ModelSpec(kind, [raw[f"generator.{p}"] for p in names],
                    raw.get("generator.a_n", 1.0), window)
    try:
        config = ExperimentConfig(
            generator=gen,
            null_model_kind=ModelKind.parse(raw["null_model"]),
            M=raw["M"],
            B=raw["B"],
            level=float(raw["level"]),
            seed=raw["seed"],
            weight_scale=float(raw.get("weight_scale", 1.0)),
            quad_order=raw.get("quad_order", 64),
            run_reference_test=raw.get("run_reference_test", True),
            null_a_n=raw.get("null_a_n"),
        )
    except ValueError as exc:
        raise DataError(f"{path}: {exc}") from exc
    mode = raw.get("mode")
    if mode not in (None, "type1", "power"):
        raise DataError(f"{path}: mode must be 'type1' or 'power'")
    return config, {"workers": raw.get("workers"), "out_dir": raw.get("out_dir"), "mode": mode}


def _cell(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return format_float(v)
    return str(v)


def replicates_to_csv(records) -> str:
    lines = [",".join(ReplicateRecord.FIELDS)]
    for rec in records:
        lines.append(",".join(_cell(getattr(rec, f)) for f in ReplicateRecord.FIELDS))
    return "\n".join(lines) + "\n"


def table_to_csv(rows) -> str:
    if not rows:
        return ""
    keys = list(rows[0])
    out = [",".join(keys)]
    for row in rows:
        out.append(",".join("" if row[k] is None else _cell(row[k]) for k in keys))
    return "\n".join(out) + "\n"
