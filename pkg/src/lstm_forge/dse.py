"""Design-space sweeps, Pareto filtering and report files."""
from __future__ import annotations

import csv
import io
import itertools
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

from .accel import (
    STYLES,
    AccelConfig,
    Calibration,
    PlatformBudget,
    SimReport,
    default_calibration,
    simulate_network,
)
from .activation import ActivationConfig
from .fixedpoint import Precision
from .lstm import NetworkSpec, forward, forward_fixed, quantize_with, snr_db, window_sequence

CSV_COLUMNS = ("platform", "style", "ws_z", "ws_w", "U", "f_mhz", "cycles", "latency_us", "ops",
               "gops", "gops_per_lut", "gops_per_dsp", "lut", "ff", "bram", "dsp", "fits", "snr_db")
THREADS_ENV = "LSTM_FORGE_THREADS"


@dataclass(frozen=True)
class SweepGrid:
    precisions: tuple
    units: tuple
    styles: tuple
    platforms: tuple
    # MHz for every platform, a {platform name: MHz} map, or None for each platform's fmax
    frequency: float | dict | None = None
    # [{"platform": ..., "style": ..., "precision": ..., "U": ..., "f_mhz": ...}], partial keys allowed
    overrides: tuple = ()

    def __post_init__(self):
        for name in ("precisions", "units", "styles", "platforms"):
            object.__setattr__(self, name, tuple(getattr(self, name)))
            if not getattr(self, name):
                raise ValueError(f"sweep axis {name!r} is empty")
        for s in self.styles:
            if s not in STYLES:
                raise ValueError(f"unknown style {s!r}")
        object.__setattr__(self, "overrides", tuple(self.overrides))

    def __len__(self):
        return len(self.precisions) * len(self.units) * len(self.styles) * len(self.platforms)

    def points(self):
        """Grid points in lexicographic index order (precision, U, style, platform)."""
        return itertools.product(self.precisions, self.units, self.styles, self.platforms)

    def frequency_for(self, prec: Precision, U: int, style: str, platform: PlatformBudget) -> float:
        f = self.frequency
        if isinstance(f, dict):
            f = f.get(platform.name)
        if f is None:
            f = platform.fmax_mhz
        for o in self.overrides:
            if (o.get("platform", platform.name) == platform.name and o.get("style", style) == style
                    and o.get("precision", prec.name) == prec.name and o.get("U", U) == U):
                f = o["f_mhz"]
        return float(f)


@dataclass
class SweepRow:
    platform: str
    style: str
    precision: str
    ws_z: int
    ws_w: int
    U: int
    f_mhz: float
    report: SimReport | None = None
    snr_db: float | None = None
    error: str | None = None

    @property
    def fits(self) -> bool:
        return self.report is not None and self.report.fits

    def value(self, key: str):
        """Column value by name, reaching into the SimReport and its resources."""
        if key in ("platform", "style", "precision", "ws_z", "ws_w", "U", "f_mhz", "snr_db", "error"):
            return getattr(self, key)
        if key == "fits":
            return self.fits
        if self.report is None:
            return None
        if key in ("lut", "ff", "bram", "dsp"):
            return getattr(self.report.resources, key)
        return getattr(self.report, key)

    def record(self) -> dict:
        d = {c: self.value(c) for c in CSV_COLUMNS}
        d["precision"] = self.precision
        d["error"] = self.error
        return d


def _snr_table(net, signal, grid, activation):
    """SNR per precision; a failing precision maps to its error message."""
    if signal is None:
        return {}
    feats = window_sequence(signal, net.input_size)
    ref = forward(net, feats)
    out = {}
    for prec in grid.precisions:
        if prec.name in out:
            continue
        try:
            out[prec.name] = snr_db(ref, forward_fixed(quantize_with(net, prec), feats, activation))
        except ValueError as e:
            out[prec.name] = str(e)
    return out


def run_sweep(net: NetworkSpec, signal, grid: SweepGrid, *, calibration: Calibration | None = None,
              activation: ActivationConfig | str = "exact", threads: int | None = None) -> list[SweepRow]:
    """Evaluate every grid point. Failures become rows carrying an error note."""
    calibration = calibration or default_calibration()
    if isinstance(activation, str):
        activation = ActivationConfig(mode=activation)
    snrs = _snr_table(net, signal, grid, activation)

    def evaluate(point) -> SweepRow:
        prec, U, style, platform = point
        row = SweepRow(platform.name, style, prec.name, prec.state.ws, prec.weight.ws, U,
                       grid.frequency_for(prec, U, style, platform))
        snr = snrs.get(prec.name)
        if isinstance(snr, str):
            row.error = f"quantization: {snr}"
            return row
        row.snr_db = snr
        try:
            if signal is None:
                quantize_with(net, prec)
            cfg = AccelConfig(style=style, U=U, precision=prec, f_mhz=row.f_mhz, platform=platform,
                              calibration=calibration)
            row.report = simulate_network(net, cfg)
        except ValueError as e:
            row.error = str(e)
        return row

    if threads is None:
        threads = int(os.environ.get(THREADS_ENV, "0")) or min(8, os.cpu_count() or 1)
    points = list(grid.points())
    if threads <= 1:
        return [evaluate(p) for p in points]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(evaluate, points))


DEFAULT_OBJECTIVES = (("latency_us", "min"), ("snr_db", "max"), ("dsp", "min"))


def pareto_front(rows, objectives=DEFAULT_OBJECTIVES) -> list:
    """Rows not dominated by any other row, in their original order.

    Rows missing a value for any objective (failed points, no SNR) take no
    part in the comparison.
    """
    for _, sense in objectives:
        if sense not in ("min", "max"):
            raise ValueError(f"objective sense must be 'min' or 'max', not {sense!r}")

    def key(row):
        vals = []
        for name, sense in objectives:
            v = row.value(name) if isinstance(row, SweepRow) else row[name]
            if v is None:
                return None
            vals.append(v if sense == "min" else -v)
        return vals

    scored = [(r, k) for r in rows if (k := key(r)) is not None]

    def dominates(a, b):
        return all(x <= y for x, y in zip(a, b)) and any(x < y for x, y in zip(a, b))

    return [r for r, k in scored if not any(dominates(k2, k) for _, k2 in scored)]


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        if math.isinf(v):
            return "inf" if v > 0 else "-inf"
        return repr(v)
    return str(v)


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return "inf" if v > 0 else ("-inf" if v < 0 else "nan")
    return v


def report_text(rows, fmt: str = "csv") -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in rows:
            w.writerow([_cell(r.value(c)) for c in CSV_COLUMNS])
        return buf.getvalue()
    if fmt == "json":
        recs = [{k: _json_value(v) for k, v in r.record().items()} for r in rows]
        return json.dumps(recs, indent=1) + "\n"
    raise ValueError(f"unknown report format {fmt!r}")


class ReportWriteError(OSError):
    pass


def emit_report(rows, fmt: str, path) -> Path:
    text = report_text(rows, fmt)
    path = Path(path)
    try:
        path.write_text(text)
    except OSError as e:
        raise ReportWriteError(f"cannot write report to {path}: {e.strerror or e}") from e
    return path


def read_report_json(path) -> list[dict]:
    """Parse a JSON report back, restoring infinite SNR values."""
    recs = json.loads(Path(path).read_text())
    for r in recs:
        for k, v in r.items():
            if v in ("inf", "-inf", "nan"):
                r[k] = float(v)
    return recs
