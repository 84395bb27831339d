import json
import math

import numpy as np
import pytest
from scipy.integrate import trapezoid

from hawkes_gof.dataio import (
    AffineMap,
    WindowPolicy,
    atomic_write,
    curve_to_csv,
    events_to_csv,
    format_float,
    ingest_events,
    load_run_config,
    read_event_times,
    replicates_to_csv,
    smooth_rate,
    to_json,
    write_events,
)
from hawkes_gof.exceptions import DataError
from hawkes_gof.experiments import ReplicateRecord
from hawkes_gof.models import ModelKind


def _write(tmp_path, text, name="ev.csv"):
    p = tmp_path / name
    p.write_text(text)
    return p


# --- event files ---------------------------------------------------------------

def test_read_with_and_without_header(tmp_path):
    a = read_event_times(_write(tmp_path, "time\n0.5\n0.25\n1.0\n"))
    b = read_event_times(_write(tmp_path, "0.25\n\n0.5\n1.0\n", "b.csv"))
    np.testing.assert_array_equal(a, [0.25, 0.5, 1.0])
    np.testing.assert_array_equal(a, b)


def test_duplicates_name_rows(tmp_path):
    with pytest.raises(DataError, match=r"row\(s\) 2, 4"):
        read_event_times(_write(tmp_path, "time\n0.3\n0.1\n0.3\n"))


def test_unparsable_rows(tmp_path):
    with pytest.raises(DataError, match="row\\(s\\) 3"):
        read_event_times(_write(tmp_path, "0.1\n0.2\nabc\n"))
    with pytest.raises(DataError, match="row\\(s\\) 1"):
        read_event_times(_write(tmp_path, "nan\n0.2\n", "n.csv"))
    with pytest.raises(DataError):
        read_event_times(tmp_path / "missing.csv")


def test_ingest_unit_window_unchanged(tmp_path):
    ev, amap = ingest_events(_write(tmp_path, "0.25\n0.5\n1.0\n"), WindowPolicy(end=1.0))
    np.testing.assert_array_equal(ev.times, [0.25, 0.5, 1.0])
    assert amap == AffineMap(0.0, 1.0)


def test_ingest_exclusion_and_rescaling():
    gen = np.random.default_rng(1)
    raw = np.sort(gen.uniform(0, 1e6, 300))
    ev, amap = ingest_events(raw, WindowPolicy(origin=0.0, end=1e6, cut=5e4))
    kept = raw[raw > 5e4]
    assert len(ev) == kept.size
    np.testing.assert_array_equal(ev.times, (kept - 5e4) / 9.5e5)
    assert amap.to_dict() == {"offset": 5e4, "scale": 9.5e5}
    np.testing.assert_allclose(amap.inverse(ev.times), kept, rtol=1e-15)


def test_ingest_errors():
    with pytest.raises(DataError):
        ingest_events([1.0, 2.0], WindowPolicy(cut=5.0))
    with pytest.raises(DataError):
        ingest_events([1.0, 1.0])
    with pytest.raises(DataError):
        ingest_events([0.0, 1.0])
    with pytest.raises(DataError):
        ingest_events([0.5, 2.0], WindowPolicy(end=1.0))
    with pytest.raises(DataError):
        ingest_events([-1.0, 2.0])


def test_ingest_export_ingest_is_exact(tmp_path):
    gen = np.random.default_rng(2)
    raw = np.sort(gen.uniform(0, 7.3e5, 500))
    ev, _ = ingest_events(raw, WindowPolicy(cut=1.2e4))
    path = tmp_path / "unit.csv"
    write_events(path, ev.times)
    again, amap = ingest_events(path, WindowPolicy(end=1.0))
    np.testing.assert_array_equal(again.times, ev.times)
    assert amap == AffineMap(0.0, 1.0)
    # and the text rendering itself is stable
    assert events_to_csv(again.times) == path.read_text()


def test_format_float_roundtrip():
    gen = np.random.default_rng(3)
    for x in gen.uniform(-1e6, 1e6, 1000):
        assert float(format_float(x)) == x
    assert format_float(math.nan) == "nan"


# --- smoothing -----------------------------------------------------------------

def test_smooth_single_event_peak():
    sigma = 0.05
    curve = smooth_rate([0.5], sigma, grid=101, window=(0.0, 1.0))
    assert curve.shape == (101, 2)
    i = int(np.argmin(np.abs(curve[:, 0] - 0.5)))
    assert curve[i, 0] == 0.5
    assert curve[i, 1] == pytest.approx(1 / (sigma * math.sqrt(2 * math.pi)), rel=1e-14)


def test_smooth_empty_and_mass():
    assert np.all(smooth_rate([], 0.1, grid=50, window=(0, 1))[:, 1] == 0)
    gen = np.random.default_rng(4)
    x = gen.uniform(0, 1, 100)
    curve = smooth_rate(x, 0.01, grid=2001, window=(0.0, 1.0))
    assert 95 <= trapezoid(curve[:, 1], curve[:, 0]) <= 105
    with pytest.raises(ValueError):
        smooth_rate(x, 0.0)


def test_curve_csv():
    text = curve_to_csv(np.array([[0.0, 1.5], [1.0, 2.0]]))
    assert text.splitlines() == ["t,rate", "0,1.5", "1,2"]


# --- JSON, config, CSV -------------------------------------------------------------

def test_to_json_nan_is_null():
    out = json.loads(to_json({"a": math.nan, "b": [1.0, math.inf], "c": ModelKind.HAWKES_EXP.value}))
    assert out["a"] is None and out["b"][0] == 1.0


def test_atomic_write(tmp_path):
    p = tmp_path / "x.txt"
    atomic_write(p, "one")
    atomic_write(p, "two")
    assert p.read_text() == "two"
    assert [f.name for f in tmp_path.iterdir()] == ["x.txt"]


def _config(tmp_path, **extra):
    raw = {"generator.kind": "constant_poisson", "generator.mu": 30, "null_model": "poisson",
           "M": 4, "B": 9, "level": 0.05, "seed": 1}
    raw.update(extra)
    return _write(tmp_path, json.dumps(raw), "cfg.json")


def test_load_run_config(tmp_path):
    cfg, io = load_run_config(_config(tmp_path, workers=2, out_dir="out"))
    assert cfg.generator.theta == (30.0,) and cfg.null_model_kind is ModelKind.CONSTANT_POISSON
    assert io == {"workers": 2, "out_dir": "out", "mode": None}


@pytest.mark.parametrize("extra, msg", [
    ({"colour": "red"}, "unknown config key"),
    ({"M": "4"}, "wrong type"),
    ({"M": True}, "wrong type"),
    ({"generator.alpha": 1.0}, "do not apply"),
    ({"mode": "fast"}, "mode"),
    ({"level": 2.0}, "level"),
])
def test_load_run_config_rejects(tmp_path, extra, msg):
    with pytest.raises(DataError, match=msg):
        load_run_config(_config(tmp_path, **extra))


def test_load_run_config_missing(tmp_path):
    p = _write(tmp_path, json.dumps({"generator.kind": "hawkes", "generator.mu": 1}), "c.json")
    with pytest.raises(DataError, match="generator.alpha"):
        load_run_config(p)
    with pytest.raises(DataError, match="invalid JSON"):
        load_run_config(_write(tmp_path, "{", "bad.json"))


def test_replicates_csv():
    rec = ReplicateRecord(0, 0, 1, 30, "ok", True, 0.1, 0.5, False, 0, 0, 0.2, 0.7, False)
    lines = replicates_to_csv([rec]).splitlines()
    assert lines[0].split(",") == list(ReplicateRecord.FIELDS)
    assert lines[1] == "0,0,1,30,ok,true,0.10000000000000001,0.5,false,0,0,0.20000000000000001,0.69999999999999996,false"
