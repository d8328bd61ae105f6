"""Fixed-point LSTM inference and an FPGA accelerator performance model."""

from .accel import (
    AccelConfig,
    PlatformBudget,
    SimReport,
    check_budget,
    normalized_throughput,
    op_count,
    resource_estimate,
    simulate_network,
    throughput_gops,
)
from .activation import build_lut, eval_lut, sigmoid_exact, step_relu, tanh_exact
from .fixedpoint import (
    FixedFormat,
    FixedValue,
    accumulator_bits,
    dequantize,
    fx_add_sat,
    fx_mul,
    max_fan_in,
    quantize,
)
from .lstm import (
    NetworkSpec,
    forward,
    forward_fixed,
    lstm_cell_step,
    quantize_network,
    snr_db,
    window_features,
)

__version__ = "0.1.0"
