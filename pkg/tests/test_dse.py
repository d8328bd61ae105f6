import csv
import json
import math

import numpy as np
import pytest

from lstm_forge.accel import UNIT_PARALLEL, AccelConfig, load_platform, simulate_network
from lstm_forge.dse import (
    CSV_COLUMNS,
    ReportWriteError,
    SweepGrid,
    emit_report,
    pareto_front,
    read_report_json,
    report_text,
    run_sweep,
)
from lstm_forge.fixedpoint import parse_precision
from lstm_forge.lstm import forward, forward_fixed, quantize_with, random_network, sine_signal, snr_db, window_sequence

NET = random_network(8, (6, 6), seed=4)
SIGNAL = sine_signal(120)
U55C = load_platform("u55c")
PRECS = [parse_precision(p) for p in ("fp32", "fp16", "fp8")]


def _grid(**kw):
    args = dict(precisions=PRECS, units=[1, 2, 6], styles=[UNIT_PARALLEL], platforms=[U55C], frequency=250.0)
    args.update(kw)
    return SweepGrid(**args)


def test_grid_validation():
    with pytest.raises(ValueError):
        _grid(units=[])
    with pytest.raises(ValueError):
        _grid(styles=["systolic"])


def test_sweep_cardinality_and_order():
    rows = run_sweep(NET, SIGNAL, _grid(), threads=4)
    assert len(rows) == 9
    assert [(r.precision, r.U) for r in rows] == [(p.name, u) for p in PRECS for u in (1, 2, 6)]
    snr = {r.precision: r.snr_db for r in rows}
    assert snr["fp16"] >= snr["fp8"]


def test_single_point_is_composition():
    grid = _grid(precisions=PRECS[1:2], units=[6])
    (row,) = run_sweep(NET, SIGNAL, grid, threads=1)
    cfg = AccelConfig(style=UNIT_PARALLEL, U=6, precision=PRECS[1], f_mhz=250.0, platform=U55C)
    assert row.report == simulate_network(NET, cfg)
    feats = window_sequence(SIGNAL, 8)
    assert row.snr_db == snr_db(forward(NET, feats), forward_fixed(quantize_with(NET, PRECS[1]), feats))


def test_failures_are_rows():
    rows = run_sweep(NET, None, _grid(units=[6, 7], precisions=PRECS[:1]), threads=1)
    assert len(rows) == 2
    assert rows[0].error is None and rows[1].error and "U=7" in rows[1].error
    assert rows[1].report is None and not rows[1].fits


def test_frequency_policies():
    g = _grid(frequency=None, overrides=[{"U": 2, "f_mhz": 100.0}])
    assert g.frequency_for(PRECS[0], 1, UNIT_PARALLEL, U55C) == U55C.fmax_mhz
    assert g.frequency_for(PRECS[0], 2, UNIT_PARALLEL, U55C) == 100.0
    g = _grid(frequency={"u55c": 200})
    assert g.frequency_for(PRECS[0], 1, UNIT_PARALLEL, U55C) == 200.0


def _dict(lat, snr, dsp):
    return {"latency_us": lat, "snr_db": snr, "dsp": dsp}


def test_pareto_examples():
    a = _dict(1.0, 50.0, 10)
    assert pareto_front([a]) == [a]
    b = _dict(2.0, 40.0, 20)
    assert pareto_front([b, a]) == [a]
    c = _dict(0.5, 30.0, 10)
    assert pareto_front([a, c]) == [a, c]
    assert pareto_front([a, dict(a)]) == [a, a]  # ties are not dominance


def test_pareto_scale_invariance():
    rng = np.random.default_rng(0)
    rows = [_dict(*rng.uniform(1, 10, 3)) for _ in range(60)]
    front = pareto_front(rows)
    scaled = [dict(r, dsp=r["dsp"] * 7.5) for r in rows]
    assert [rows.index(r) for r in front] == [scaled.index(r) for r in pareto_front(scaled)]


def test_pareto_skips_missing_objectives():
    rows = run_sweep(NET, None, _grid(precisions=PRECS[:1]), threads=1)
    assert pareto_front(rows) == []  # no SNR without a signal


def test_csv_report(tmp_path):
    assert report_text([], "csv") == ",".join(CSV_COLUMNS) + "\n"
    rows = run_sweep(NET, SIGNAL, _grid(), threads=3)
    p = emit_report(rows, "csv", tmp_path / "r.csv")
    lines = p.read_text().splitlines()
    assert len(lines) == 10 and lines[0] == ",".join(CSV_COLUMNS)
    rec = next(csv.DictReader(p.open()))
    assert float(rec["latency_us"]) == rows[0].report.latency_us


def test_reports_deterministic(tmp_path):
    a = report_text(run_sweep(NET, SIGNAL, _grid(), threads=1), "json")
    b = report_text(run_sweep(NET, SIGNAL, _grid(), threads=8), "json")
    assert a == b


def test_json_round_trip(tmp_path):
    rows = run_sweep(NET, SIGNAL, _grid(units=[6, 7]), threads=2)
    rows[0].snr_db = math.inf
    p = emit_report(rows, "json", tmp_path / "r.json")
    back = read_report_json(p)
    assert len(back) == len(rows)
    for r, d in zip(rows, back):
        for col in CSV_COLUMNS:
            assert d[col] == r.value(col)
        assert d["error"] == r.error
    assert json.loads(p.read_text())[0]["snr_db"] == "inf"


def test_report_errors(tmp_path):
    with pytest.raises(ReportWriteError, match="missing"):
        emit_report([], "csv", tmp_path / "missing" / "r.csv")
    with pytest.raises(ValueError):
        report_text([], "xml")
