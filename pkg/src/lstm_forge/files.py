"""Weight, signal and quantized-network file formats."""
from __future__ import annotations

import json
import math
from pathlib import Path

import numpy as np

from .lstm import GATES, GateParams, LayerParams, NetworkSpec, QuantizedNetwork, Readout


class InputFileError(ValueError):
    """A file that exists but cannot be parsed; carries the path and line."""

    def __init__(self, path, message, line=None):
        self.path, self.line = str(path), line
        where = f"{path}:{line}" if line is not None else str(path)
        super().__init__(f"{where}: {message}")


def _read_text(path) -> str:
    # OSError propagates; callers map it to an I/O failure
    return Path(path).read_text()


def network_to_mapping(net: NetworkSpec) -> dict:
    layers = []
    for layer in net.layers:
        layers.append({
            "input_size": layer.input_size,
            "hidden_size": layer.hidden_size,
            "gates": {g: {"wx": layer.gates[g].wx.tolist(), "wh": layer.gates[g].wh.tolist(),
                          "b": layer.gates[g].b.tolist()} for g in GATES},
        })
    doc = {"layers": layers, "input_window": net.input_window}
    if net.readout is not None:
        doc["readout"] = {"w": net.readout.w.tolist(), "b": net.readout.b}
    return doc


def network_from_mapping(doc: dict) -> NetworkSpec:
    layers = []
    for k, entry in enumerate(doc["layers"]):
        gates = {}
        for g in GATES:
            p = entry["gates"][g]
            gates[g] = GateParams(np.array(p["wx"], dtype=np.float64).reshape(len(p["wx"]), -1),
                                  np.array(p["wh"], dtype=np.float64).reshape(len(p["wh"]), -1),
                                  np.array(p["b"], dtype=np.float64))
        layer = LayerParams(gates)
        for key, actual in (("input_size", layer.input_size), ("hidden_size", layer.hidden_size)):
            if key in entry and int(entry[key]) != actual:
                raise ValueError(f"layer {k}: declared {key}={entry[key]} but matrices give {actual}")
        layers.append(layer)
    ro = doc.get("readout")
    readout = Readout(np.array(ro["w"], dtype=np.float64), float(ro["b"])) if ro else None
    window = int(doc.get("input_window", layers[0].input_size if layers else 16))
    return NetworkSpec(tuple(layers), readout, window)


def load_network(path) -> NetworkSpec:
    text = _read_text(path)
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputFileError(path, f"invalid JSON: {e.msg}", e.lineno) from None
    try:
        return network_from_mapping(doc)
    except (KeyError, TypeError, ValueError, IndexError) as e:
        detail = f"missing key {e}" if isinstance(e, KeyError) else str(e)
        raise InputFileError(path, f"bad weight file: {detail}") from None


def save_network(net: NetworkSpec, path):
    Path(path).write_text(json.dumps(network_to_mapping(net)) + "\n")


def load_signal(path) -> np.ndarray:
    """One sample per line; blank lines and a leading ``#`` header are skipped."""
    values = []
    for n, line in enumerate(_read_text(path).splitlines(), start=1):
        s = line.strip()
        if not s or s.startswith("#"):
            continue
        field = s.split(",")[0].strip()
        try:
            v = float(field)
        except ValueError:
            raise InputFileError(path, f"not a number: {field!r}", n) from None
        if not math.isfinite(v):
            raise InputFileError(path, f"non-finite sample {field!r}", n)
        values.append(v)
    if not values:
        raise InputFileError(path, "signal file contains no samples")
    return np.array(values)


def save_signal(signal, path, header: str | None = "# sample"):
    lines = [header] if header else []
    lines += [repr(float(v)) for v in signal]
    Path(path).write_text("\n".join(lines) + "\n")


def _fmt(f) -> dict:
    return {"ws": f.ws, "fl": f.fl}


def quantized_to_mapping(q: QuantizedNetwork) -> dict:
    """Raw integer parameters plus formats. Integers wider than 53 bits become strings."""
    def ints(a):
        return [int(v) if abs(int(v)) < 2 ** 53 else str(int(v)) for v in np.ravel(a)]

    layers = []
    for ql in q.layers:
        H, n = ql.hidden_size, ql.input_size + ql.hidden_size
        gates = {}
        for k, g in enumerate(GATES):
            rows = ql.w[k * H:(k + 1) * H]
            gates[g] = {"wx": [ints(r[:ql.input_size]) for r in rows],
                        "wh": [ints(r[ql.input_size:n]) for r in rows],
                        "b": ints(ql.b[k * H:(k + 1) * H])}
        layers.append({"input_size": ql.input_size, "hidden_size": H, "gates": gates})
    doc = {
        "formats": {"state": _fmt(q.state), "weight": _fmt(q.weight), "accumulator": _fmt(q.acc)},
        "n_c": q.n_c,
        "layers": layers,
        "warnings": list(q.warnings),
    }
    if q.readout_w is not None:
        doc["readout"] = {"w": ints(q.readout_w), "b": ints([q.readout_b])[0]}
    return doc


def save_quantized(q: QuantizedNetwork, path):
    Path(path).write_text(json.dumps(quantized_to_mapping(q), indent=1) + "\n")
