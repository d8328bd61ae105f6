"""Signed fixed-point (Q-format) arithmetic.

Values are stored as raw two's-complement integers together with a
``FixedFormat`` (word length ``ws``, fraction length ``fl``). Whenever a shift
drops bits the result is rounded to nearest, ties to even, and results that do
not fit the destination format saturate instead of wrapping.

Array helpers (``quantize_array``, ``shift_round``, ``saturate``) work on numpy
integer arrays and fall back to ``object`` arrays of Python ints when a word
is too wide for int64.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Products of two 64-bit words must still be describable.
MAX_WORD_LENGTH = 128
INT64_SAFE_BITS = 62


@dataclass(frozen=True)
class FixedFormat:
    word_length: int
    frac_length: int

    def __post_init__(self):
        ws, fl = self.word_length, self.frac_length
        if not isinstance(ws, (int, np.integer)) or not isinstance(fl, (int, np.integer)):
            raise TypeError("word_length and frac_length must be integers")
        if not 2 <= ws <= MAX_WORD_LENGTH:
            raise ValueError(f"word length {ws} outside 2..{MAX_WORD_LENGTH}")
        if not 0 <= fl <= ws - 1:
            raise ValueError(f"fraction length {fl} outside 0..{ws - 1}")

    @property
    def ws(self) -> int:
        return self.word_length

    @property
    def fl(self) -> int:
        return self.frac_length

    @property
    def min_raw(self) -> int:
        return -(1 << (self.word_length - 1))

    @property
    def max_raw(self) -> int:
        return (1 << (self.word_length - 1)) - 1

    @property
    def resolution(self) -> float:
        return math.ldexp(1.0, -self.frac_length)

    @property
    def min_value(self) -> float:
        return math.ldexp(self.min_raw, -self.frac_length)

    @property
    def max_value(self) -> float:
        return math.ldexp(self.max_raw, -self.frac_length)

    def fits(self, raw: int) -> bool:
        return self.min_raw <= raw <= self.max_raw

    def __str__(self):
        return f"Q(ws={self.word_length}, fl={self.frac_length})"


@dataclass(frozen=True)
class FixedValue:
    raw: int
    format: FixedFormat

    def __post_init__(self):
        if not self.format.fits(int(self.raw)):
            raise ValueError(f"raw {self.raw} does not fit {self.format}")
        object.__setattr__(self, "raw", int(self.raw))

    def __float__(self):
        return dequantize(self)


def _round_half_even_scaled(x: float, fl: int, ws: int = MAX_WORD_LENGTH) -> int:
    # Values this far out saturate anyway; clamping first keeps ldexp finite.
    bound = math.ldexp(1.0, ws - fl)
    x = min(max(x, -bound), bound)
    # math.ldexp is exact, and round() on a float is ties-to-even.
    return int(round(math.ldexp(x, fl)))


def quantize(x: float, fmt: FixedFormat) -> FixedValue:
    if not isinstance(fmt, FixedFormat):
        raise TypeError("fmt must be a FixedFormat")
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot quantize non-finite value {x}")
    raw = _round_half_even_scaled(x, fmt.frac_length, fmt.word_length)
    return FixedValue(min(max(raw, fmt.min_raw), fmt.max_raw), fmt)


def dequantize(v: FixedValue) -> float:
    """Real value ``raw * 2**-fl``; exact whenever ``raw`` fits a double's mantissa."""
    return math.ldexp(v.raw, -v.format.frac_length)


def shift_round_int(raw: int, shift: int) -> int:
    """Arithmetic right shift by ``shift`` bits with round-half-even (left shift if negative)."""
    if shift <= 0:
        return raw << -shift
    q = raw >> shift
    r = raw - (q << shift)
    half = 1 << (shift - 1)
    if r > half or (r == half and q & 1):
        q += 1
    return q


def rescale(v: FixedValue, out: FixedFormat) -> FixedValue:
    """Move ``v`` to another format: re-align the binary point, then saturate."""
    raw = shift_round_int(v.raw, v.format.frac_length - out.frac_length)
    return FixedValue(min(max(raw, out.min_raw), out.max_raw), out)


def fx_mul(a: FixedValue, b: FixedValue) -> FixedValue:
    fmt = FixedFormat(a.format.word_length + b.format.word_length,
                      a.format.frac_length + b.format.frac_length)
    return FixedValue(a.raw * b.raw, fmt)


def fx_add_sat(a: FixedValue, b: FixedValue, out: FixedFormat) -> FixedValue:
    """Add two values sharing a fraction length and saturate into ``out``.

    If ``out`` has a different fraction length the exact sum is re-scaled
    (round-half-even) before saturation.
    """
    if a.format.frac_length != b.format.frac_length:
        raise ValueError("operands must share a fraction length; rescale first")
    total = a.raw + b.raw
    raw = shift_round_int(total, a.format.frac_length - out.frac_length)
    return FixedValue(min(max(raw, out.min_raw), out.max_raw), out)


def max_fan_in(mni: int, mnnll: int) -> int:
    if mni < 1 or mnnll < 1:
        raise ValueError("fan-in counts must be positive")
    return max(mni, mnnll)


def accumulator_bits(n_c: int, n_z: int, n_w: int) -> int:
    """Bits needed for an overflow-free sum of ``n_c`` products.

    Evaluates ``ceil(log2(n_c * (2**(n_z-1)-1) * (2**(n_w-1)-1))) + 1`` with
    integer arithmetic only.
    """
    if n_c < 1:
        raise ValueError("n_c must be >= 1")
    if n_z < 2 or n_w < 2:
        raise ValueError("n_z and n_w must be >= 2")
    worst = n_c * ((1 << (n_z - 1)) - 1) * ((1 << (n_w - 1)) - 1)
    # ceil(log2(p)) == (p - 1).bit_length() for p >= 1
    return (worst - 1).bit_length() + 1


@dataclass(frozen=True)
class AccumulatorSpec:
    n_c: int
    n_s: int


def accumulator_spec(n_c: int, n_z: int, n_w: int) -> AccumulatorSpec:
    return AccumulatorSpec(n_c, max(accumulator_bits(n_c, n_z, n_w), n_z, n_w))


@dataclass
class MacResult:
    value: FixedValue
    saturated: bool
    saturation_events: int


def fx_mac(acts, weights, acc: FixedFormat) -> MacResult:
    """Sequential multiply-accumulate in a saturating ``acc``-wide register.

    ``acts`` and ``weights`` are equal-length sequences of FixedValue. The
    accumulator fraction length must equal the product fraction length.
    """
    if len(acts) != len(weights):
        raise ValueError("operand lengths differ")
    total, events = 0, 0
    for a, w in zip(acts, weights):
        p = fx_mul(a, w)
        if p.format.frac_length != acc.frac_length:
            raise ValueError("accumulator fraction length must match products")
        total += p.raw
        if total > acc.max_raw:
            total, events = acc.max_raw, events + 1
        elif total < acc.min_raw:
            total, events = acc.min_raw, events + 1
    return MacResult(FixedValue(total, acc), events > 0, events)


# ---------------------------------------------------------------------------
# array helpers

def int_dtype_for(bits: int):
    return np.int64 if bits <= INT64_SAFE_BITS else object


def quantize_array(x, fmt: FixedFormat, dtype=None) -> np.ndarray:
    """Vectorised :func:`quantize` returning raw integers."""
    x = np.asarray(x, dtype=np.float64)
    if not np.all(np.isfinite(x)):
        raise ValueError("cannot quantize non-finite values")
    dtype = dtype or int_dtype_for(fmt.word_length)
    if dtype is not object and fmt.word_length <= INT64_SAFE_BITS:
        bound = math.ldexp(1.0, fmt.word_length - fmt.frac_length)
        scaled = np.rint(np.ldexp(np.clip(x, -bound, bound), fmt.frac_length))
        scaled = np.clip(scaled, fmt.min_raw, fmt.max_raw)
        return scaled.astype(np.int64)
    flat = [min(max(_round_half_even_scaled(float(v), fmt.frac_length, fmt.word_length), fmt.min_raw),
                fmt.max_raw) for v in x.ravel()]
    out = np.empty(len(flat), dtype=object)
    out[:] = flat
    return out.reshape(x.shape)


def count_clipped(x, fmt: FixedFormat) -> int:
    """Number of entries of real array ``x`` that would saturate in ``fmt``."""
    bound = math.ldexp(1.0, fmt.word_length - fmt.frac_length)
    x = np.clip(np.asarray(x, dtype=np.float64), -bound, bound)
    scaled = np.rint(np.ldexp(x, fmt.frac_length))
    return int(np.count_nonzero((scaled > fmt.max_raw) | (scaled < fmt.min_raw)))


def dequantize_array(raw, fmt: FixedFormat) -> np.ndarray:
    raw = np.asarray(raw)
    if raw.dtype == object:
        return np.array([math.ldexp(int(r), -fmt.frac_length) for r in raw.ravel()],
                        dtype=np.float64).reshape(raw.shape)
    return np.ldexp(raw.astype(np.float64), -fmt.frac_length)


def shift_round(raw: np.ndarray, shift: int) -> np.ndarray:
    """Array version of :func:`shift_round_int`."""
    if shift <= 0:
        return raw << -shift
    q = raw >> shift
    r = raw - (q << shift)
    half = 1 << (shift - 1)
    up = (r > half) | ((r == half) & ((q & 1) == 1))
    return np.where(up, q + 1, q)


def saturate(raw: np.ndarray, fmt: FixedFormat) -> tuple[np.ndarray, int]:
    """Clamp to ``fmt``; returns the clamped array and the number of clamped entries."""
    hi = raw > fmt.max_raw
    lo = raw < fmt.min_raw
    n = int(np.count_nonzero(hi) + np.count_nonzero(lo))
    if n == 0:
        return raw, 0
    return np.where(hi, fmt.max_raw, np.where(lo, fmt.min_raw, raw)), n


@dataclass(frozen=True)
class Precision:
    """Formats for one precision point: states/inputs, weights, optional accumulator width."""

    name: str
    state: FixedFormat
    weight: FixedFormat
    acc_bits: int | None = None


PRECISION_WORDS = {"fp32": 32, "fp16": 16, "fp8": 8}
INTEGER_BITS = 3


def default_frac_length(ws: int) -> int:
    """Sign bit plus three integer bits (range [-8, 8)); never fewer fraction than integer bits."""
    return max(ws - 1 - INTEGER_BITS, ws // 2)


def parse_precision(spec, *, state_fl=None, weight_fl=None, acc_bits=None) -> Precision:
    """Build a :class:`Precision` from ``"fp16"``-style names or a mapping.

    Mapping form: ``{"name": ..., "state": {"ws": 16, "fl": 8},
    "weight": {"ws": 16, "fl": 8}, "acc_bits": 36}``; missing pieces default
    from ``name``. Fraction lengths default to :func:`default_frac_length`.
    """
    if isinstance(spec, Precision):
        return spec
    if isinstance(spec, str):
        spec = {"name": spec}
    if not isinstance(spec, dict):
        raise ValueError(f"unrecognised precision {spec!r}")
    name = spec.get("name")
    base = None
    if name is not None:
        if name not in PRECISION_WORDS:
            raise ValueError(f"unknown precision {name!r}; expected one of {sorted(PRECISION_WORDS)}")
        base = PRECISION_WORDS[name]

    def fmt(key, fl_override):
        d = spec.get(key) or {}
        ws = d.get("ws", base)
        if ws is None:
            raise ValueError(f"precision needs a name or {key}.ws")
        fl = d.get("fl", default_frac_length(int(ws)))
        if fl_override is not None:
            fl = fl_override
        return FixedFormat(int(ws), int(fl))

    state = fmt("state", state_fl)
    weight = fmt("weight", weight_fl)
    bits = acc_bits if acc_bits is not None else spec.get("acc_bits")
    if name is None:
        name = f"q{state.ws}x{weight.ws}"
    return Precision(name, state, weight, None if bits is None else int(bits))
