"""Command-line entry point: gen-demo, quantize, infer, simulate, sweep.

Exit codes: 0 success, 1 usage error, 2 unparseable input, 3 I/O failure.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .accel import STYLES, UNIT_PARALLEL, AccelConfig, load_calibration, load_platform, simulate_network
from .activation import ActivationConfig
from .dse import ReportWriteError, SweepGrid, emit_report, pareto_front, run_sweep
from .files import InputFileError, load_network, load_signal, save_network, save_quantized, save_signal
from .fixedpoint import parse_precision
from .lstm import forward, forward_fixed, quantize_with, random_network, sine_signal, snr_db, window_sequence

log = logging.getLogger("lstm_forge")

EXIT_OK, EXIT_USAGE, EXIT_PARSE, EXIT_IO = 0, 1, 2, 3
REFERENCE = "fp64-reference"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _need_file(path, what: str) -> Path:
    p = Path(path)
    if not p.is_file():
        raise FileNotFoundError(f"{what} file not found: {p}")
    return p


def _precision(args):
    try:
        return parse_precision(args.precision, state_fl=args.state_fl, weight_fl=args.weight_fl,
                               acc_bits=args.acc_bits)
    except ValueError as e:
        raise UsageError(str(e)) from None


def _json_safe(obj):
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if isinstance(obj, dict):
        return {k: _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    return obj


# ---------------------------------------------------------------------------
# subcommands

DEMO_SWEEP = {
    "weights": "weights.json",
    "signal": "signal.csv",
    "precisions": ["fp32", "fp16", "fp8"],
    "units": [1, 2, 15],
    "styles": [UNIT_PARALLEL],
    "platforms": ["u55c"],
    "frequency": 250.0,
    "activation": {"mode": "exact"},
    "format": "csv",
    "out": "sweep.csv",
}


def cmd_gen_demo(args) -> int:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_network(random_network(seed=args.seed), out / "weights.json")
    save_signal(sine_signal(args.steps), out / "signal.csv")
    (out / "sweep.json").write_text(json.dumps(DEMO_SWEEP, indent=1) + "\n")
    print(f"wrote weights.json, signal.csv, sweep.json to {out}")
    return EXIT_OK


def cmd_quantize(args) -> int:
    net = load_network(_need_file(args.weights, "weights"))
    q = quantize_with(net, _precision(args))
    save_quantized(q, args.out)
    print(f"{q.state} weights {q.weight} accumulator {q.acc} n_c={q.n_c}; "
          f"{len(q.warnings)} warning(s)")
    return EXIT_OK


def cmd_infer(args) -> int:
    wpath, spath = _need_file(args.weights, "weights"), _need_file(args.signal, "signal")
    net, signal = load_network(wpath), load_signal(spath)
    feats = window_sequence(signal, net.input_size)
    ref = forward(net, feats) if (args.reference or args.precision == REFERENCE) else None
    if args.precision == REFERENCE:
        pred = ref
    else:
        act = ActivationConfig(mode=args.activation)
        pred = forward_fixed(quantize_with(net, _precision(args)), feats, act)
    pred = np.asarray(pred)
    lines = ["# prediction"] + [",".join(repr(float(v)) for v in np.atleast_1d(p)) for p in pred]
    text = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    summary = {"samples": int(len(pred)), "precision": args.precision}
    if args.reference:
        summary["snr_db"] = snr_db(ref, pred)
    print(json.dumps(_json_safe(summary)), file=sys.stderr if not args.out else sys.stdout)
    return EXIT_OK


def cmd_simulate(args) -> int:
    net = load_network(_need_file(args.weights, "weights")) if args.weights else random_network(seed=args.seed)
    calibration = _calibration(args.calibration)
    platform = load_platform(args.platform) if args.platform else None
    hmax = max(net.hidden_sizes)
    if args.unit_parallelism > hmax:
        raise UsageError(f"-U {args.unit_parallelism} exceeds hidden size {hmax}")
    try:
        cfg = AccelConfig(style=args.style, U=args.unit_parallelism, precision=_precision(args),
                          f_mhz=args.freq, platform=platform, calibration=calibration, lanes=args.lanes)
    except ValueError as e:
        raise UsageError(str(e)) from None
    print(json.dumps(_json_safe(simulate_network(net, cfg).to_dict()), indent=1))
    return EXIT_OK


def _calibration(spec):
    if spec is None or spec == "published":
        return load_calibration(spec)
    return load_calibration(_need_file(spec, "calibration"))


def _sweep_config(path: Path) -> dict:
    try:
        cfg = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise InputFileError(path, f"invalid JSON: {e.msg}", e.lineno) from None
    if not isinstance(cfg, dict):
        raise InputFileError(path, "sweep config must be a JSON object")
    for key in ("weights", "precisions", "units", "styles", "platforms"):
        if key not in cfg:
            raise InputFileError(path, f"sweep config missing {key!r}")
    return cfg


def cmd_sweep(args) -> int:
    cpath = _need_file(args.config, "sweep config")
    cfg = _sweep_config(cpath)
    base = cpath.parent

    def rel(p):
        return base / p

    wpath = _need_file(rel(cfg["weights"]), "weights")
    spath = _need_file(rel(cfg["signal"]), "signal") if cfg.get("signal") else None
    cal = cfg.get("calibration")
    calibration = _calibration(None if cal is None else (cal if cal == "published" else rel(cal)))
    fmt = args.format or cfg.get("format", "csv")
    out = Path(args.out) if args.out else rel(cfg.get("out", f"sweep.{fmt}"))
    if not out.parent.is_dir():
        raise FileNotFoundError(f"output directory not found: {out.parent}")

    net = load_network(wpath)
    signal = load_signal(spath) if spath else None
    try:
        platforms = [load_platform(p if not str(p).endswith(".json") else rel(p)) for p in cfg["platforms"]]
        grid = SweepGrid(precisions=[parse_precision(p) for p in cfg["precisions"]],
                         units=[int(u) for u in cfg["units"]], styles=cfg["styles"],
                         platforms=platforms, frequency=cfg.get("frequency"),
                         overrides=cfg.get("overrides", ()))
        activation = ActivationConfig.from_mapping(cfg.get("activation"))
    except (TypeError, ValueError) as e:
        raise InputFileError(cpath, str(e)) from None

    rows = run_sweep(net, signal, grid, calibration=calibration, activation=activation,
                     threads=args.threads)
    front = pareto_front(rows)
    emit_report(front if args.pareto_only else rows, fmt, out)
    failed = sum(r.error is not None for r in rows)
    print(f"{len(rows)} points, {failed} failed, pareto front {len(front)}; report: {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------

def _add_precision_flags(p, default="fp16", choices=("fp32", "fp16", "fp8")):
    p.add_argument("--precision", default=default, choices=choices)
    p.add_argument("--state-fl", type=int, help="fraction bits for states and inputs")
    p.add_argument("--weight-fl", type=int, help="fraction bits for weights")
    p.add_argument("--acc-bits", type=int, help="accumulator width (default: overflow-free)")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="lstm-forge", description="Fixed-point LSTM inference and accelerator modelling.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("gen-demo", help="write a seeded demo network, sine signal and sweep config")
    p.add_argument("--out", default="demo")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--steps", type=int, default=1000)
    p.set_defaults(func=cmd_gen_demo)

    p = sub.add_parser("quantize", help="quantize a weight file")
    p.add_argument("weights")
    p.add_argument("--out", required=True)
    _add_precision_flags(p)
    p.set_defaults(func=cmd_quantize)

    p = sub.add_parser("infer", help="run the network over a signal")
    p.add_argument("weights")
    p.add_argument("signal")
    _add_precision_flags(p, choices=("fp32", "fp16", "fp8", REFERENCE))
    p.add_argument("--activation", default="exact", choices=("exact", "lut"))
    p.add_argument("--reference", action="store_true", help="also report SNR against double precision")
    p.add_argument("--out", help="predictions CSV (default: stdout)")
    p.set_defaults(func=cmd_infer)

    p = sub.add_parser("simulate", help="cycle and resource estimate as JSON")
    p.add_argument("--weights", help="weight file (default: seeded demo network)")
    p.add_argument("--seed", type=int, default=42)
    p.add_argument("--style", default=UNIT_PARALLEL, choices=STYLES)
    p.add_argument("-U", "--unit-parallelism", type=int, default=1)
    p.add_argument("--freq", type=float, default=250.0, help="clock in MHz")
    p.add_argument("--platform", help="preset name or platform JSON file")
    p.add_argument("--calibration", help="calibration JSON file, or 'published' for the bundled fit")
    p.add_argument("--lanes", type=int, default=1, help="replicated MAC lanes (pipelined style)")
    _add_precision_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="design-space sweep from a JSON config")
    p.add_argument("config")
    p.add_argument("--out", help="report path (default: from config)")
    p.add_argument("--format", choices=("csv", "json"))
    p.add_argument("--pareto-only", action="store_true")
    p.add_argument("--threads", type=int, help="worker threads (default: LSTM_FORGE_THREADS or CPU count)")
    p.set_defaults(func=cmd_sweep)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as e:  # --help, --version and usage errors
        return e.code if isinstance(e.code, int) else EXIT_USAGE
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except UsageError as e:
        print(f"lstm-forge: error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except InputFileError as e:
        print(f"lstm-forge: {e}", file=sys.stderr)
        return EXIT_PARSE
    except (OSError, ReportWriteError) as e:
        print(f"lstm-forge: {e}", file=sys.stderr)
        return EXIT_IO
    except ValueError as e:
        print(f"lstm-forge: {e}", file=sys.stderr)
        return EXIT_PARSE


if __name__ == "__main__":
    sys.exit(main())
