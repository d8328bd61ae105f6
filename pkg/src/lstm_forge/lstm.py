"""LSTM inference in double precision and in bit-accurate fixed point.

Gate order is always ``i, f, u, o`` (input, forget, input modulation, output).
Each layer consumes the concatenated operand ``[x_t ; h_{t-1}]`` so the
matrix-vector fan-in of a layer is ``input_size + hidden_size``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np

from .activation import SIGMOID, TANH, ActivationConfig, eval_lut_raw, sigmoid_exact, tanh_exact
from .fixedpoint import (
    FixedFormat,
    Precision,
    accumulator_bits,
    count_clipped,
    dequantize_array,
    max_fan_in,
    quantize_array,
    saturate,
    shift_round,
)

log = logging.getLogger(__name__)

GATES = ("i", "f", "u", "o")
DEFAULT_INPUT_WINDOW = 16
DEFAULT_HIDDEN = (15, 15, 15)


@dataclass(frozen=True)
class GateParams:
    wx: np.ndarray  # H x I
    wh: np.ndarray  # H x H
    b: np.ndarray   # H


@dataclass(frozen=True)
class LayerParams:
    gates: dict

    def __post_init__(self):
        if set(self.gates) != set(GATES):
            raise ValueError(f"layer needs gates {GATES}, got {sorted(self.gates)}")
        shapes, gates = set(), {}
        for g in GATES:
            p = self.gates[g]
            wx, wh, b = (np.asarray(a, dtype=np.float64) for a in (p.wx, p.wh, p.b))
            if wx.ndim != 2 or wh.ndim != 2 or b.ndim != 1:
                raise ValueError(f"gate {g}: wx/wh must be matrices and b a vector")
            h, i = wx.shape
            if wh.shape != (h, h) or b.shape != (h,):
                raise ValueError(f"gate {g}: inconsistent shapes wx{wx.shape} wh{wh.shape} b{b.shape}")
            if not (np.all(np.isfinite(wx)) and np.all(np.isfinite(wh)) and np.all(np.isfinite(b))):
                raise ValueError(f"gate {g}: non-finite parameter")
            shapes.add((h, i))
            gates[g] = GateParams(wx, wh, b)
        if len(shapes) != 1:
            raise ValueError("all four gates must share dimensions")
        object.__setattr__(self, "gates", gates)

    @property
    def hidden_size(self) -> int:
        return self.gates["i"].wx.shape[0]

    @property
    def input_size(self) -> int:
        return self.gates["i"].wx.shape[1]

    @property
    def fan_in(self) -> int:
        return self.input_size + self.hidden_size

    def stacked(self) -> tuple[np.ndarray, np.ndarray]:
        """``(W, b)`` with W of shape ``4H x (I+H)`` acting on ``[x; h]``, gates stacked i, f, u, o."""
        w = np.vstack([np.hstack([self.gates[g].wx, self.gates[g].wh]) for g in GATES])
        b = np.concatenate([self.gates[g].b for g in GATES])
        return w, b


@dataclass(frozen=True)
class Readout:
    w: np.ndarray
    b: float


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple
    readout: Readout | None = None
    input_window: int = DEFAULT_INPUT_WINDOW

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        for k in range(1, len(self.layers)):
            if self.layers[k].input_size != self.layers[k - 1].hidden_size:
                raise ValueError(f"layer {k} input size {self.layers[k].input_size} "
                                 f"!= layer {k - 1} hidden size {self.layers[k - 1].hidden_size}")
        if self.readout is not None:
            w = np.asarray(self.readout.w, dtype=np.float64)
            if self.layers and w.shape != (self.layers[-1].hidden_size,):
                raise ValueError("readout weight length must equal last hidden size")
            object.__setattr__(self, "readout", Readout(w, float(self.readout.b)))

    @property
    def input_size(self) -> int:
        return self.layers[0].input_size if self.layers else 0

    @property
    def hidden_sizes(self) -> tuple[int, ...]:
        return tuple(layer.hidden_size for layer in self.layers)


@dataclass
class CellState:
    h: np.ndarray
    c: np.ndarray

    @classmethod
    def zeros(cls, hidden: int) -> "CellState":
        return cls(np.zeros(hidden), np.zeros(hidden))


def random_network(input_size=DEFAULT_INPUT_WINDOW, hidden=DEFAULT_HIDDEN, *, seed=42,
                   scale=0.5, readout=True) -> NetworkSpec:
    """Network with every parameter drawn uniformly from ``[-scale, scale]``."""
    rng = np.random.default_rng(seed)
    layers, i = [], input_size
    for h in hidden:
        layers.append(LayerParams({g: GateParams(rng.uniform(-scale, scale, (h, i)),
                                                 rng.uniform(-scale, scale, (h, h)),
                                                 rng.uniform(-scale, scale, h)) for g in GATES}))
        i = h
    ro = Readout(rng.uniform(-scale, scale, i), 0.0) if readout and layers else None
    return NetworkSpec(tuple(layers), ro, input_size)


def zero_network(input_size=DEFAULT_INPUT_WINDOW, hidden=DEFAULT_HIDDEN, readout_bias=0.0) -> NetworkSpec:
    layers, i = [], input_size
    for h in hidden:
        layers.append(LayerParams({g: GateParams(np.zeros((h, i)), np.zeros((h, h)), np.zeros(h))
                                   for g in GATES}))
        i = h
    return NetworkSpec(tuple(layers), Readout(np.zeros(i), readout_bias), input_size)


# ---------------------------------------------------------------------------
# reference path

def lstm_cell_step(x_t, state: CellState, p: LayerParams) -> CellState:
    x_t = np.asarray(x_t, dtype=np.float64)
    H = p.hidden_size
    if x_t.shape != (p.input_size,):
        raise ValueError(f"input has shape {x_t.shape}, layer expects ({p.input_size},)")
    if state.h.shape != (H,) or state.c.shape != (H,):
        raise ValueError("state dimensions do not match layer hidden size")
    w, b = p.stacked()
    pre = w @ np.concatenate([x_t, state.h]) + b
    i = sigmoid_exact(pre[:H])
    f = sigmoid_exact(pre[H:2 * H])
    u = tanh_exact(pre[2 * H:3 * H])
    o = sigmoid_exact(pre[3 * H:])
    c = f * state.c + i * u
    return CellState(o * np.tanh(c), c)


def dense_readout(h, w, b: float) -> float:
    h = np.asarray(h, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    if h.shape != w.shape:
        raise ValueError(f"readout dimension mismatch {h.shape} vs {w.shape}")
    return float(w @ h + b)


def _check_features(net: NetworkSpec, features) -> np.ndarray:
    feats = np.asarray(features, dtype=np.float64)
    if feats.ndim == 1 and net.input_size == 1:
        feats = feats[:, None]
    if feats.ndim != 2 or (len(feats) and feats.shape[1] != net.input_size):
        raise ValueError(f"features must be T x {net.input_size}, got {feats.shape}")
    return feats


def forward(net: NetworkSpec, features) -> np.ndarray:
    """Run the stacked network over a feature sequence from zero state.

    Returns one readout value per time step, or the last layer's hidden
    vectors (``T x H``) when the network has no readout.
    """
    feats = _check_features(net, features)
    states = [CellState.zeros(layer.hidden_size) for layer in net.layers]
    stacked = [layer.stacked() for layer in net.layers]
    out = []
    for x in feats:
        for k, (w, b) in enumerate(stacked):
            st, H = states[k], net.layers[k].hidden_size
            pre = w @ np.concatenate([x, st.h]) + b
            i, f = sigmoid_exact(pre[:H]), sigmoid_exact(pre[H:2 * H])
            u, o = np.tanh(pre[2 * H:3 * H]), sigmoid_exact(pre[3 * H:])
            c = f * st.c + i * u
            states[k] = CellState(o * np.tanh(c), c)
            x = states[k].h
        out.append(dense_readout(x, net.readout.w, net.readout.b) if net.readout else x)
    return np.array(out)


# ---------------------------------------------------------------------------
# fixed-point path

@dataclass
class QuantizedLayer:
    w: np.ndarray  # raw, 4H x (I+H), weight format
    b: np.ndarray  # raw, 4H, accumulator format
    hidden_size: int
    input_size: int


@dataclass
class QuantizedNetwork:
    layers: list
    readout_w: np.ndarray | None
    readout_b: int | None
    state: FixedFormat
    weight: FixedFormat
    acc: FixedFormat
    n_c: int
    input_window: int
    source: NetworkSpec
    warnings: list = field(default_factory=list)

    @property
    def n_s(self) -> int:
        return self.acc.word_length

    @property
    def int_dtype(self):
        # exact prefix sums need the accumulator plus the product width
        need = max(self.acc.word_length, self.state.ws + self.weight.ws + self.n_c.bit_length())
        return np.int64 if need <= 62 else object


def quantize_network(net: NetworkSpec, n_z: FixedFormat, n_w: FixedFormat,
                     acc_bits: int | None = None) -> QuantizedNetwork:
    """Quantize weights to ``n_w`` and biases to the accumulator format.

    The accumulator width is sized from the largest concatenated fan-in. An
    explicit ``acc_bits`` may widen it but never narrow it below that size.
    Out-of-range parameters saturate and are recorded in ``warnings``.
    """
    if not net.layers:
        raise ValueError("network has no layers")
    n_c = 1
    for layer in net.layers:
        n_c = max_fan_in(n_c, layer.fan_in)
    need = max(accumulator_bits(n_c, n_z.ws, n_w.ws), n_z.ws, n_w.ws)
    if acc_bits is not None and acc_bits < need:
        raise ValueError(f"accumulator of {acc_bits} bits cannot hold fan-in {n_c} sums; need {need}")
    n_s = acc_bits or need
    acc = FixedFormat(n_s, n_z.fl + n_w.fl)
    warnings = []

    def q(x, fmt, what):
        n = count_clipped(x, fmt)
        if n:
            msg = f"{what}: {n} value(s) saturated to {fmt}"
            warnings.append(msg)
            log.warning(msg)
        return quantize_array(x, fmt)

    layers = []
    for k, layer in enumerate(net.layers):
        w, b = layer.stacked()
        layers.append(QuantizedLayer(q(w, n_w, f"layer {k} weights"), q(b, acc, f"layer {k} biases"),
                                     layer.hidden_size, layer.input_size))
    rw = rb = None
    if net.readout is not None:
        rw = q(net.readout.w, n_w, "readout weights")
        rb = int(q(np.array([net.readout.b]), acc, "readout bias")[0])
    return QuantizedNetwork(layers, rw, rb, n_z, n_w, acc, n_c, net.input_window, net, warnings)


def quantize_with(net: NetworkSpec, precision: Precision) -> QuantizedNetwork:
    return quantize_network(net, precision.state, precision.weight, precision.acc_bits)


@dataclass
class SaturationCounter:
    """Saturation events seen during a fixed-point run, by pipeline stage."""

    inputs: int = 0
    mvo: int = 0
    bias: int = 0
    rescale: int = 0
    evo: int = 0
    readout: int = 0

    @property
    def total(self) -> int:
        return self.inputs + self.mvo + self.bias + self.rescale + self.evo + self.readout


def _mvo(w: np.ndarray, z: np.ndarray, acc: FixedFormat, counter: SaturationCounter) -> np.ndarray:
    """Row-wise dot products in a saturating accumulator register."""
    prods = w * z[None, :]
    partial = np.cumsum(prods, axis=1)
    bad = np.any((partial > acc.max_raw) | (partial < acc.min_raw), axis=1)
    sums = partial[:, -1].copy()
    for r in np.flatnonzero(bad):
        total = 0
        for p in prods[r]:
            total = min(max(total + int(p), acc.min_raw), acc.max_raw)
        sums[r] = total
    counter.mvo += int(np.count_nonzero(bad))
    return sums


class _Activations:
    def __init__(self, cfg: ActivationConfig, fmt: FixedFormat, dtype):
        self.fmt, self.dtype, self.cfg = fmt, dtype, cfg
        self.tables = cfg.tables(fmt) if cfg.mode == "lut" else None

    def __call__(self, kind: str, raw: np.ndarray) -> np.ndarray:
        if self.tables is not None:
            return eval_lut_raw(self.tables[kind], raw, self.fmt).astype(self.dtype)
        x = dequantize_array(raw, self.fmt)
        y = sigmoid_exact(x) if kind == SIGMOID else tanh_exact(x)
        return quantize_array(y, self.fmt).astype(self.dtype)


def forward_fixed(qnet: QuantizedNetwork, features, activation="exact",
                  counter: SaturationCounter | None = None) -> np.ndarray:
    """Bit-accurate fixed-point counterpart of :func:`forward`.

    Dot products run at the full accumulator width with no intermediate
    rounding; pre-activations are re-scaled to the state format; the
    element-wise stage keeps one guard bit before rounding back. The readout
    is dequantized straight from the accumulator.
    """
    if isinstance(activation, str):
        activation = ActivationConfig(mode=activation)
    counter = counter if counter is not None else SaturationCounter()
    feats = _check_features(qnet.source, features)
    z_fmt, w_fmt, acc = qnet.state, qnet.weight, qnet.acc
    dtype = qnet.int_dtype
    act = _Activations(activation, z_fmt, dtype)
    layers = [(ql.w.astype(dtype), ql.b.astype(dtype), ql.hidden_size) for ql in qnet.layers]
    hs = [np.zeros(H, dtype=dtype) for _, _, H in layers]
    cs = [np.zeros(H, dtype=dtype) for _, _, H in layers]
    fl = z_fmt.fl
    counter.inputs += count_clipped(feats, z_fmt)
    x_all = quantize_array(feats, z_fmt).astype(dtype)
    out = []
    for x in x_all:
        for k, (w, b, H) in enumerate(layers):
            sums = _mvo(w, np.concatenate([x, hs[k]]), acc, counter)
            sums, n = saturate(sums + b, acc)
            counter.bias += n
            pre, n = saturate(shift_round(sums, w_fmt.fl), z_fmt)
            counter.rescale += n
            i = act(SIGMOID, pre[:H])
            f = act(SIGMOID, pre[H:2 * H])
            u = act(TANH, pre[2 * H:3 * H])
            o = act(SIGMOID, pre[3 * H:])
            # products carry 2*fl fraction bits; keep fl+1 before the final rounding
            guard = shift_round(f * cs[k], fl - 1) + shift_round(i * u, fl - 1)
            c, n = saturate(shift_round(guard, 1), z_fmt)
            counter.evo += n
            h, n = saturate(shift_round(o * act(TANH, c), fl), z_fmt)
            counter.evo += n
            cs[k], hs[k] = c, h
            x = h
        if qnet.readout_w is not None:
            total = int(np.sum(qnet.readout_w.astype(dtype) * x)) + qnet.readout_b
            if not acc.min_raw <= total <= acc.max_raw:
                counter.readout += 1
                total = min(max(total, acc.min_raw), acc.max_raw)
            out.append(math.ldexp(total, -acc.fl))
        else:
            out.append(dequantize_array(x, z_fmt))
    return np.array(out)


# ---------------------------------------------------------------------------
# features and scoring

def window_features(signal, t: int, n: int = DEFAULT_INPUT_WINDOW) -> np.ndarray:
    """The ``n`` samples ending at index ``t``, oldest first, zero-padded before the start."""
    if n <= 0:
        raise ValueError("window length must be positive")
    if t < 0:
        raise ValueError("t must be non-negative")
    signal = np.asarray(signal, dtype=np.float64)
    out = np.zeros(n)
    lo = t - n + 1
    src = signal[max(lo, 0):t + 1]
    out[n - len(src):] = src
    return out


def window_sequence(signal, n: int = DEFAULT_INPUT_WINDOW) -> np.ndarray:
    """Stack :func:`window_features` for every index of ``signal`` (``T x n``)."""
    if n <= 0:
        raise ValueError("window length must be positive")
    signal = np.asarray(signal, dtype=np.float64)
    padded = np.concatenate([np.zeros(n - 1), signal])
    return np.lib.stride_tricks.sliding_window_view(padded, n).copy()


def snr_db(reference, estimate) -> float:
    """``10 log10(sum ref^2 / sum (ref - est)^2)``; ``inf`` when the estimate is exact."""
    ref = np.asarray(reference, dtype=np.float64).ravel()
    est = np.asarray(estimate, dtype=np.float64).ravel()
    if ref.size == 0 or ref.shape != est.shape:
        raise ValueError("reference and estimate must be equal, non-zero length")
    p_sig = float(np.sum(ref * ref))
    if p_sig == 0.0:
        raise ValueError("reference signal has zero power")
    p_err = float(np.sum((ref - est) ** 2))
    if p_err == 0.0:
        return math.inf
    return 10.0 * math.log10(p_sig / p_err)


def sine_signal(steps: int = 1000, period: float = 50.0, amplitude: float = 1.0) -> np.ndarray:
    t = np.arange(steps)
    return amplitude * np.sin(2.0 * np.pi * t / period)
