"""Analytic cycle and resource model of the LSTM accelerator.

Two design styles are modelled:

``pipelined``
    HLS-like. Each gate is one initiation-interval-1 pipeline over hidden
    units whose weight rows stream out of BRAM. Unrolling the hidden-unit loop
    (``lanes``) adds MAC pipelines, but rows still arrive at most
    ``memory_ports`` per cycle.
``unit-parallel``
    HDL-like. ``U`` hidden-unit modules per gate, each doing ``fan_in``
    sequential MACs; the four gates run side by side.

Cycle counts are a calibrated schedule, not an RTL simulation. Fixed
overheads (activation latency, layer hand-off, control, pipeline fill) come
from a calibration file. Frequency is always an input.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field, replace
from importlib import resources
from pathlib import Path

from .fixedpoint import Precision, parse_precision
from .lstm import GATES, NetworkSpec

PIPELINED = "pipelined"
UNIT_PARALLEL = "unit-parallel"
STYLES = (PIPELINED, UNIT_PARALLEL)
N_GATES = len(GATES)


def _check_style(style: str) -> str:
    if style not in STYLES:
        raise ValueError(f"unknown design style {style!r}; expected one of {STYLES}")
    return style


def _check_units(U: int, H: int):
    if not 1 <= U <= H:
        raise ValueError(f"unit parallelism U={U} outside 1..{H}")


def schedule_mvo(fan_in: int, H: int, U: int, style: str, *, lanes: int = 1,
                 memory_ports: int = 1) -> int:
    """Cycles for one layer's matrix-vector stage (all gates in parallel)."""
    _check_style(style)
    _check_units(U, H)
    if fan_in < 1:
        raise ValueError("fan_in must be >= 1")
    if style == UNIT_PARALLEL:
        return math.ceil(H / U) * fan_in
    if lanes < 1 or memory_ports < 1:
        raise ValueError("lanes and memory_ports must be >= 1")
    # one weight row per lane per cycle, capped by the BRAM read ports
    rows_per_cycle = min(lanes, memory_ports)
    return fan_in + math.ceil(H / rows_per_cycle) - 1


def schedule_evo(H: int, U: int, style: str, evo_depth: int = 4) -> int:
    """Cycles for one layer's element-wise stage (cell update and output)."""
    _check_style(style)
    _check_units(U, H)
    if evo_depth < 1:
        raise ValueError("evo_depth must be >= 1")
    if style == UNIT_PARALLEL:
        return math.ceil(H / U) * evo_depth
    return H + evo_depth - 1


def op_count(net: NetworkSpec) -> int:
    """Operations per inference step.

    Per layer: gate MACs counted as a multiply plus an add, one bias add per
    gate row, and four element-wise ops per hidden unit. Activations and the
    readout are not counted.
    """
    total = 0
    for layer in net.layers:
        H, I = layer.hidden_size, layer.input_size
        total += N_GATES * H * (I + H) * 2 + N_GATES * H + 4 * H
    return total


def throughput_gops(ops: int, latency_us: float) -> float:
    if not latency_us > 0:
        raise ValueError("latency must be positive")
    return ops / (latency_us * 1000.0)


def normalized_throughput(gops: float, luts: int, dsps: int) -> tuple[float, float | None]:
    """``(GOPS/LUT x 1e6, GOPS/DSP x 1e3)``; the DSP figure is ``None`` without DSPs."""
    if luts <= 0:
        raise ValueError("LUT count must be positive")
    if dsps < 0:
        raise ValueError("DSP count must be non-negative")
    return gops / luts * 1e6, (gops / dsps * 1e3 if dsps else None)


# ---------------------------------------------------------------------------
# platforms and calibration

@dataclass(frozen=True)
class PlatformBudget:
    name: str
    lut: int
    ff: int
    bram36k: float
    dsp: int
    fmax_mhz: float
    part: str = ""

    def __post_init__(self):
        for key in ("lut", "ff", "bram36k", "dsp", "fmax_mhz"):
            if not getattr(self, key) > 0:
                raise ValueError(f"platform {self.name}: {key} must be positive")

    @classmethod
    def from_mapping(cls, d: dict) -> "PlatformBudget":
        try:
            return cls(str(d["name"]), int(d["lut"]), int(d["ff"]), float(d["bram36k"]),
                       int(d["dsp"]), float(d["fmax_mhz"]), str(d.get("part", "")))
        except KeyError as e:
            raise ValueError(f"platform entry missing key {e}") from None


def derive_total(used: float, percent: float) -> float:
    """Device total implied by a utilisation pair such as ``712 (41%)``."""
    if percent <= 0:
        raise ValueError("percent must be positive")
    return used * 100.0 / percent


def _load_json_resource(name: str):
    return json.loads(resources.files("lstm_forge").joinpath("data").joinpath(name).read_text())


def platform_presets() -> dict[str, PlatformBudget]:
    return {d["name"]: PlatformBudget.from_mapping(d) for d in _load_json_resource("platforms.json")}


def load_platform(name_or_path) -> PlatformBudget:
    """A preset name (``vc707``, ``zcu104``, ``u55c``) or a JSON file with one platform."""
    presets = platform_presets()
    key = str(name_or_path).lower()
    if key in presets:
        return presets[key]
    path = Path(name_or_path)
    if not path.exists():
        raise ValueError(f"unknown platform {name_or_path!r}; presets are {sorted(presets)}")
    return PlatformBudget.from_mapping(json.loads(path.read_text()))


@dataclass(frozen=True)
class Overheads:
    pipeline_fill: int = 4
    activation_latency: int = 8
    evo_depth: int = 4
    layer_handoff: int = 32
    control: int = 8

    def __post_init__(self):
        for k, v in asdict(self).items():
            if v < 0:
                raise ValueError(f"overhead {k} must be non-negative")
        if self.evo_depth < 1:
            raise ValueError("evo_depth must be >= 1")


@dataclass(frozen=True)
class ResourceCoefficients:
    dsp_per_mult: float
    evo_dsps: int
    activation_dsps: int
    lut_base: int
    lut_per_lane: int
    ff_base: int
    ff_per_lane: int
    bram_per_lane: float


def precision_class(precision: Precision) -> str:
    """Bucket a precision into the fp8/fp16/fp32 calibration rows by its widest operand."""
    ws = max(precision.state.ws, precision.weight.ws)
    if ws <= 8:
        return "fp8"
    if ws <= 16:
        return "fp16"
    return "fp32"


@dataclass(frozen=True)
class Calibration:
    name: str
    memory_ports: int
    overhead_table: dict
    resource_table: dict
    source: str = ""

    @classmethod
    def from_mapping(cls, d: dict, source: str = "") -> "Calibration":
        try:
            return cls(d.get("name", source or "custom"), int(d.get("memory_ports", 2)),
                       d["overheads"], d["resources"], source)
        except KeyError as e:
            raise ValueError(f"calibration missing section {e}") from None

    def overheads(self, style: str, pclass: str) -> Overheads:
        table = self.overhead_table.get(style, {})
        entry = table.get(pclass, table.get("default"))
        if entry is None:
            raise ValueError(f"calibration {self.name!r} has no overheads for {style}/{pclass}")
        return Overheads(**entry)

    def coefficients(self, style: str, pclass: str) -> ResourceCoefficients:
        try:
            return ResourceCoefficients(**self.resource_table[style][pclass])
        except KeyError:
            raise ValueError(f"calibration {self.name!r} has no resources for {style}/{pclass}") from None

    def with_overheads(self, style: str, pclass: str, oh: Overheads) -> "Calibration":
        table = {s: dict(v) for s, v in self.overhead_table.items()}
        table.setdefault(style, {})[pclass] = asdict(oh)
        return replace(self, overhead_table=table)

    def to_mapping(self) -> dict:
        return {"name": self.name, "memory_ports": self.memory_ports,
                "overheads": self.overhead_table, "resources": self.resource_table}


def default_calibration() -> Calibration:
    return Calibration.from_mapping(_load_json_resource("calibration_default.json"), "default")


def published_calibration() -> Calibration:
    """Overheads tuned to the published end-to-end latencies (see ``calibration_published.json``)."""
    return Calibration.from_mapping(_load_json_resource("calibration_published.json"), "published")


def load_calibration(path=None) -> Calibration:
    if path is None:
        return default_calibration()
    if str(path) == "published":
        return published_calibration()
    return Calibration.from_mapping(json.loads(Path(path).read_text()), str(path))


# ---------------------------------------------------------------------------
# configuration and reports

@dataclass(frozen=True)
class AccelConfig:
    style: str = UNIT_PARALLEL
    U: int = 1
    precision: Precision = field(default_factory=lambda: parse_precision("fp16"))
    f_mhz: float = 250.0
    platform: PlatformBudget | None = None
    calibration: Calibration = field(default_factory=default_calibration)
    overheads: Overheads | None = None
    lanes: int = 1

    def __post_init__(self):
        _check_style(self.style)
        if self.U < 1:
            raise ValueError("unit parallelism must be >= 1")
        if self.lanes < 1:
            raise ValueError("lanes must be >= 1")
        if not self.f_mhz > 0:
            raise ValueError("frequency must be positive")
        if self.platform is not None and self.f_mhz > self.platform.fmax_mhz:
            raise ValueError(f"{self.f_mhz} MHz exceeds {self.platform.name} limit "
                             f"of {self.platform.fmax_mhz} MHz")

    @property
    def pclass(self) -> str:
        return precision_class(self.precision)

    def resolved_overheads(self) -> Overheads:
        return self.overheads or self.calibration.overheads(self.style, self.pclass)


@dataclass(frozen=True)
class Resources:
    lut: int
    ff: int
    bram: float
    dsp: int

    def as_dict(self) -> dict:
        return {"lut": self.lut, "ff": self.ff, "bram": self.bram, "dsp": self.dsp}


@dataclass(frozen=True)
class BudgetCheck:
    fits: bool
    utilization: dict


@dataclass(frozen=True)
class SimReport:
    cycles: int
    latency_us: float
    ops: int
    gops: float
    gops_per_lut: float
    gops_per_dsp: float | None
    resources: Resources
    fits: bool
    utilization: dict
    breakdown: dict

    def to_dict(self) -> dict:
        d = asdict(self)
        d["resources"] = self.resources.as_dict()
        return d


def resource_estimate(net: NetworkSpec, cfg: AccelConfig) -> Resources:
    """LUT/FF/BRAM/DSP estimate from the calibration coefficients.

    ``lanes`` is ``U`` for unit-parallel designs and the unroll factor for
    pipelined ones. Each lane holds one multiplier per fan-in element.
    """
    co = cfg.calibration.coefficients(cfg.style, cfg.pclass)
    parallel = cfg.U if cfg.style == UNIT_PARALLEL else cfg.lanes
    n_c = max((layer.fan_in for layer in net.layers), default=0)
    mac_dsps = math.ceil(N_GATES * parallel * n_c * co.dsp_per_mult)
    dsp = mac_dsps + co.evo_dsps + co.activation_dsps
    bram = math.ceil(2 * N_GATES * parallel * co.bram_per_lane) / 2  # half-BRAM granularity
    return Resources(lut=int(round(co.lut_base + parallel * co.lut_per_lane)),
                     ff=int(round(co.ff_base + parallel * co.ff_per_lane)),
                     bram=bram, dsp=int(dsp))


def check_budget(est: Resources, budget: PlatformBudget) -> BudgetCheck:
    util = {"lut": 100.0 * est.lut / budget.lut, "ff": 100.0 * est.ff / budget.ff,
            "bram": 100.0 * est.bram / budget.bram36k, "dsp": 100.0 * est.dsp / budget.dsp}
    fits = (est.lut <= budget.lut and est.ff <= budget.ff
            and est.bram <= budget.bram36k and est.dsp <= budget.dsp)
    return BudgetCheck(fits, util)


def cycle_breakdown(net: NetworkSpec, cfg: AccelConfig) -> dict:
    oh = cfg.resolved_overheads()
    H_max = max(net.hidden_sizes, default=0)
    if cfg.U > H_max:
        raise ValueError(f"unit parallelism U={cfg.U} exceeds hidden size {H_max}")
    mvo = evo = 0
    for layer in net.layers:
        H = layer.hidden_size
        U = min(cfg.U, H)
        mvo += schedule_mvo(layer.fan_in, H, U, cfg.style, lanes=cfg.lanes,
                            memory_ports=cfg.calibration.memory_ports)
        evo += schedule_evo(H, U, cfg.style, oh.evo_depth)
    n = len(net.layers)
    return {
        "mvo": mvo,
        "activation": n * oh.activation_latency,
        "evo": evo,
        "layer_handoff": n * oh.layer_handoff,
        # one sequential MAC per hidden unit of the last layer
        "readout": net.layers[-1].hidden_size if net.readout is not None and net.layers else 0,
        "control": oh.control,
        "pipeline_fill": oh.pipeline_fill,
    }


def simulate_network(net: NetworkSpec, cfg: AccelConfig) -> SimReport:
    """Cycles, latency, throughput and resources for one inference step.

    A resource budget violation is reported through ``fits``; a platform-less
    config always fits.
    """
    if not net.layers:
        raise ValueError("network has no layers")
    breakdown = cycle_breakdown(net, cfg)
    cycles = sum(breakdown.values())
    latency = cycles / cfg.f_mhz
    ops = op_count(net)
    gops = throughput_gops(ops, latency)
    est = resource_estimate(net, cfg)
    per_lut, per_dsp = normalized_throughput(gops, est.lut, est.dsp)
    if cfg.platform is not None:
        check = check_budget(est, cfg.platform)
    else:
        check = BudgetCheck(True, {})
    return SimReport(cycles, latency, ops, gops, per_lut, per_dsp, est, check.fits,
                     check.utilization, breakdown)


PER_LAYER_KNOBS = ("activation_latency", "layer_handoff")


def fit_overhead(net: NetworkSpec, cfg: AccelConfig, target_latency_us: float,
                 knob: str = "layer_handoff") -> Overheads:
    """Solve one overhead knob so the modelled latency best matches a measurement."""
    oh = cfg.resolved_overheads()
    if knob not in ("pipeline_fill", "control") + PER_LAYER_KNOBS:
        raise ValueError(f"cannot fit overhead {knob!r}")
    zeroed = replace(cfg, overheads=replace(oh, **{knob: 0}))
    base = sum(cycle_breakdown(net, zeroed).values())
    weight = len(net.layers) if knob in PER_LAYER_KNOBS else 1
    target_cycles = target_latency_us * cfg.f_mhz
    return replace(oh, **{knob: max(0, round((target_cycles - base) / weight))})
