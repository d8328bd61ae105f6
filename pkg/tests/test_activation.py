import mpmath
import numpy as np
import pytest

from lstm_forge.activation import (
    SIGMOID,
    TANH,
    ActivationConfig,
    build_lut,
    eval_lut,
    eval_lut_raw,
    sigmoid_exact,
    step_relu,
    tanh_exact,
)
from lstm_forge.fixedpoint import FixedFormat, dequantize, quantize, quantize_array

Q16_8 = FixedFormat(16, 8)


def test_sigmoid_values():
    assert sigmoid_exact(0.0) == 0.5
    assert sigmoid_exact(1.0) == pytest.approx(float(1 / (1 + mpmath.exp(-1))), abs=1e-15)
    assert sigmoid_exact(1.0) == pytest.approx(0.7310586, abs=1e-7)
    assert sigmoid_exact(40.0) >= 1 - 1e-12
    assert sigmoid_exact(-800.0) == 0.0  # no overflow warning path


def test_tanh_values():
    assert tanh_exact(0.0) == 0.0
    assert tanh_exact(1.0) == pytest.approx(0.7615942, abs=1e-7)
    xs = np.linspace(-3, 3, 13)
    assert np.array_equal(tanh_exact(-xs), -tanh_exact(xs))


def test_step_relu():
    assert [step_relu(v) for v in (-3, 2, 0)] == [0, 2, 0]


@pytest.mark.parametrize("kind,lo,hi,step,n", [(SIGMOID, -1, 1, 0.1, 20), (SIGMOID, -1, 1, 0.5, 4),
                                               (TANH, -2, 2, 0.1, 40)])
def test_sample_counts(kind, lo, hi, step, n):
    assert len(build_lut(kind, lo, hi, step, Q16_8).samples) == n


def test_tanh_clamps():
    t = build_lut(TANH, -2, 2, 0.1, Q16_8)
    assert (dequantize(t.below_value), dequantize(t.above_value)) == (-1.0, 1.0)


@pytest.mark.parametrize("kind", [SIGMOID, TANH])
def test_samples_monotone(kind):
    s = [v.raw for v in build_lut(kind, -4, 4, 0.05, Q16_8).samples]
    assert all(a <= b for a, b in zip(s, s[1:]))


def test_bad_step_rejected():
    with pytest.raises(ValueError):
        build_lut(SIGMOID, -1, 1, 0.3, Q16_8)
    with pytest.raises(ValueError):
        build_lut(SIGMOID, 1, -1, 0.1, Q16_8)


def test_out_of_range_clamps():
    t = build_lut(SIGMOID, -1, 1, 0.1, Q16_8)
    assert dequantize(eval_lut(t, quantize(-2, Q16_8))) == 0.0
    assert dequantize(eval_lut(t, quantize(2, Q16_8))) == 1.0


def test_centre_is_near_half():
    t = build_lut(SIGMOID, -1, 1, 0.1, Q16_8)
    # half-bin sampling plus one output LSB
    assert abs(dequantize(eval_lut(t, quantize(0, Q16_8))) - 0.5) <= 0.0125 + 2 ** -8


def test_raw_path_matches_scalar():
    t = build_lut(TANH, -2, 2, 0.05, Q16_8)
    xs = np.linspace(-3, 3, 1537)
    raw = quantize_array(xs, Q16_8)
    got = eval_lut_raw(t, raw, Q16_8)
    want = [eval_lut(t, quantize(x, Q16_8)).raw for x in xs]
    assert got.tolist() == want


def test_activation_config_parsing():
    cfg = ActivationConfig.from_mapping({"mode": "lut", "sigmoid": {"range": [-2, 2], "step": 0.1}})
    assert cfg.mode == "lut" and cfg.sigmoid_range == (-2.0, 2.0, 0.1)
    assert len(cfg.tables(Q16_8)[SIGMOID].samples) == 40
    with pytest.raises(ValueError):
        ActivationConfig(mode="cordic")


@pytest.mark.parametrize("kind,lo,hi", [(SIGMOID, 0.0, 1.0), (TANH, -1.0, 1.0)])
def test_lookup_monotone_and_in_codomain(kind, lo, hi):
    t = build_lut(kind, -2, 2, 0.1, Q16_8)
    raw = np.arange(Q16_8.min_raw, Q16_8.max_raw + 1, 7, dtype=np.int64)
    out = eval_lut_raw(t, raw, Q16_8).astype(np.int64)
    assert np.all(np.diff(out) >= 0)
    assert out.min() >= quantize(lo, Q16_8).raw and out.max() <= quantize(hi, Q16_8).raw
