"""Exact activation functions and LUT-based fixed-point approximations."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .fixedpoint import FixedFormat, FixedValue, dequantize, quantize

SIGMOID = "log-sigmoid"
TANH = "tanh"
_KIND_ALIASES = {"sigmoid": SIGMOID, "log-sigmoid": SIGMOID, "tanh": TANH}

# (lo, hi, step) used for network inference in LUT mode
DEFAULT_LUT_RANGES = {
    SIGMOID: (-4.0, 4.0, 0.05),
    TANH: (-2.0, 2.0, 0.05),
}


def sigmoid_exact(x):
    """Logistic function, stable for large |x|; accepts scalars or arrays."""
    if np.ndim(x) == 0:
        x = float(x)
        if x >= 0:
            return 1.0 / (1.0 + math.exp(-x))
        e = math.exp(x)
        return e / (1.0 + e)
    x = np.asarray(x, dtype=np.float64)
    e = np.exp(-np.abs(x))
    return np.where(x >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def tanh_exact(x):
    if np.ndim(x) == 0:
        return math.tanh(float(x))
    return np.tanh(np.asarray(x, dtype=np.float64))


def step_relu(x):
    if np.ndim(x) == 0:
        return max(0.0, float(x))
    return np.maximum(0.0, np.asarray(x, dtype=np.float64))


EXACT = {SIGMOID: sigmoid_exact, TANH: tanh_exact}
CODOMAIN = {SIGMOID: (0.0, 1.0), TANH: (-1.0, 1.0)}


def canonical_kind(kind: str) -> str:
    try:
        return _KIND_ALIASES[kind]
    except KeyError:
        raise ValueError(f"unknown activation kind {kind!r}") from None


@dataclass(frozen=True)
class LutTable:
    """Sampled activation: one stored value per ``step``-wide bin of ``[lo, hi)``.

    Entry ``k`` holds ``f`` evaluated at the centre of bin ``k`` so that the
    worst-case sampling error inside the range is ``max|f'| * step / 2``.
    Inputs outside ``[lo, hi]`` return the clamp values.
    """

    kind: str
    lo: float
    hi: float
    step: float
    samples: tuple[FixedValue, ...]
    below_value: FixedValue
    above_value: FixedValue

    @property
    def format(self) -> FixedFormat:
        return self.below_value.format

    def __len__(self):
        return len(self.samples)

    def raw_samples(self) -> np.ndarray:
        return np.array([s.raw for s in self.samples], dtype=object)


def build_lut(kind: str, lo: float, hi: float, step: float, fmt: FixedFormat) -> LutTable:
    kind = canonical_kind(kind)
    if not lo < hi:
        raise ValueError("LUT range requires lo < hi")
    if not step > 0:
        raise ValueError("LUT step must be positive")
    ratio = (hi - lo) / step
    n = round(ratio)
    if n < 1 or abs(ratio - n) > 1e-9:
        raise ValueError(f"range [{lo}, {hi}] is not a whole number of {step} steps")
    f = EXACT[kind]
    samples = tuple(quantize(f(lo + (k + 0.5) * step), fmt) for k in range(n))
    lo_clamp, hi_clamp = CODOMAIN[kind]
    return LutTable(kind, float(lo), float(hi), float(step), samples,
                    quantize(lo_clamp, fmt), quantize(hi_clamp, fmt))


def lut_index(t: LutTable, x: float) -> int:
    # small epsilon keeps inputs that sit exactly on a bin edge in the upper bin
    k = math.floor((x - t.lo) / t.step + 1e-9)
    return min(max(k, 0), len(t.samples) - 1)


def eval_lut(t: LutTable, x: FixedValue) -> FixedValue:
    xv = dequantize(x) if isinstance(x, FixedValue) else float(x)
    if xv < t.lo:
        return t.below_value
    if xv > t.hi:
        return t.above_value
    return t.samples[lut_index(t, xv)]


def eval_lut_raw(t: LutTable, raw: np.ndarray, in_fmt: FixedFormat) -> np.ndarray:
    """Vectorised lookup on raw inputs in ``in_fmt``; returns raw outputs in the table format."""
    raw = np.asarray(raw)
    x = np.ldexp(raw.astype(np.float64), -in_fmt.frac_length)
    idx = np.floor((x - t.lo) / t.step + 1e-9).astype(np.int64)
    idx = np.clip(idx, 0, len(t.samples) - 1)
    table = np.array([s.raw for s in t.samples], dtype=np.int64 if t.format.ws <= 62 else object)
    out = table[idx]
    out = np.where(x < t.lo, t.below_value.raw, out)
    out = np.where(x > t.hi, t.above_value.raw, out)
    return out.astype(table.dtype)


@dataclass(frozen=True)
class ActivationConfig:
    """Selects computation-based (``exact``) or table-based (``lut``) activations."""

    mode: str = "exact"
    sigmoid_range: tuple[float, float, float] = DEFAULT_LUT_RANGES[SIGMOID]
    tanh_range: tuple[float, float, float] = DEFAULT_LUT_RANGES[TANH]

    def __post_init__(self):
        if self.mode not in ("exact", "lut"):
            raise ValueError(f"activation mode must be 'exact' or 'lut', not {self.mode!r}")

    @classmethod
    def from_mapping(cls, d: dict | None) -> "ActivationConfig":
        """Parse ``{"mode": ..., "sigmoid": {"range": [lo, hi], "step": s}, "tanh": {...}}``."""
        d = d or {}

        def rng(key, default):
            sub = d.get(key)
            if not sub:
                return default
            lo, hi = sub.get("range", default[:2])
            return (float(lo), float(hi), float(sub.get("step", default[2])))

        return cls(d.get("mode", "exact"),
                   rng("sigmoid", DEFAULT_LUT_RANGES[SIGMOID]),
                   rng("tanh", DEFAULT_LUT_RANGES[TANH]))

    def tables(self, fmt: FixedFormat) -> dict[str, LutTable]:
        return {SIGMOID: build_lut(SIGMOID, *self.sigmoid_range, fmt),
                TANH: build_lut(TANH, *self.tanh_range, fmt)}
