import json
from dataclasses import replace

import pytest
from hypothesis import given, settings, strategies as st

from lstm_forge.accel import (
    PIPELINED,
    UNIT_PARALLEL,
    AccelConfig,
    Overheads,
    Resources,
    check_budget,
    derive_total,
    fit_overhead,
    load_calibration,
    load_platform,
    normalized_throughput,
    op_count,
    published_calibration,
    platform_presets,
    resource_estimate,
    schedule_evo,
    schedule_mvo,
    simulate_network,
    throughput_gops,
)
from lstm_forge.fixedpoint import parse_precision
from lstm_forge.lstm import NetworkSpec, random_network

NET = random_network()


def _brute_ops(net):
    # count every arithmetic op by walking the loops
    ops = 0
    for layer in net.layers:
        for _gate in range(4):
            for _row in range(layer.hidden_size):
                for _col in range(layer.fan_in):
                    ops += 2
                ops += 1
        ops += 4 * layer.hidden_size  # f*c, i*u, add, o*tanh(c)
    return ops


@pytest.mark.parametrize("args,cycles", [((31, 15, 15), 31), ((31, 15, 1), 465), ((31, 15, 2), 248)])
def test_mvo_unit_parallel(args, cycles):
    assert schedule_mvo(*args, UNIT_PARALLEL) == cycles


def test_evo_examples():
    assert schedule_evo(15, 15, UNIT_PARALLEL, 4) == 4
    assert schedule_evo(15, 1, UNIT_PARALLEL, 4) == 60
    assert all(schedule_evo(15, u, PIPELINED, 4) == 18 for u in (1, 7, 15))


def test_mvo_pipelined_memory_bound():
    one = schedule_mvo(31, 15, 1, PIPELINED, lanes=1, memory_ports=2)
    eight = schedule_mvo(31, 15, 1, PIPELINED, lanes=8, memory_ports=2)
    assert one == 45 and eight == 38


@pytest.mark.parametrize("U", [0, 16])
def test_schedule_rejects_u(U):
    with pytest.raises(ValueError):
        schedule_mvo(31, 15, U, UNIT_PARALLEL)


def test_op_count():
    assert op_count(NET) == 11280 == _brute_ops(NET)
    assert op_count(random_network(1, (1,))) == 24
    assert op_count(NetworkSpec(())) == 0


def test_throughput():
    assert throughput_gops(1000, 1.0) == 1.0
    assert throughput_gops(11280, 1.42) == pytest.approx(7.94, abs=0.005)
    assert throughput_gops(11280, 2.92) == pytest.approx(3.86, abs=0.005)
    with pytest.raises(ValueError):
        throughput_gops(1, 0)


def test_normalized_throughput():
    lut, dsp = normalized_throughput(1.0, 10 ** 6, 1000)
    assert (lut, dsp) == pytest.approx((1.0, 1.0))
    lut, dsp = normalized_throughput(2.36, 25346, 224)
    assert lut == pytest.approx(93.42, rel=0.01) and dsp == pytest.approx(10.57, rel=0.01)
    assert normalized_throughput(1.0, 100, 0)[1] is None


def test_platform_presets_match_reported_utilisation():
    zcu = load_platform("zcu104")
    assert derive_total(712, 41) == pytest.approx(zcu.dsp, rel=0.01)
    assert set(platform_presets()) == {"vc707", "zcu104", "u55c"}
    with pytest.raises(ValueError):
        load_platform("no-such-board")


def test_platform_file(tmp_path):
    p = tmp_path / "board.json"
    p.write_text(json.dumps({"name": "b", "lut": 10, "ff": 10, "bram36k": 1, "dsp": 1, "fmax_mhz": 100}))
    assert load_platform(p).fmax_mhz == 100
    with pytest.raises(ValueError):
        load_platform(str(tmp_path / "missing.json"))


def test_budget():
    zcu = load_platform("zcu104")
    est = Resources(1000, 1000, 1.0, 712)
    assert round(check_budget(est, zcu).utilization["dsp"]) == 41
    same = Resources(zcu.lut, zcu.ff, zcu.bram36k, zcu.dsp)
    chk = check_budget(same, zcu)
    assert chk.fits and all(v == 100.0 for v in chk.utilization.values())
    assert not check_budget(replace(same, dsp=zcu.dsp + 1), zcu).fits


def test_config_validation():
    with pytest.raises(ValueError):
        AccelConfig(U=0)
    with pytest.raises(ValueError):
        AccelConfig(style="systolic")
    with pytest.raises(ValueError):
        AccelConfig(f_mhz=500, platform=load_platform("zcu104"))
    with pytest.raises(ValueError):
        simulate_network(NET, AccelConfig(U=16))


def test_resources_pipelined_presets():
    fp16 = AccelConfig(style=PIPELINED, precision=parse_precision("fp16"), f_mhz=350)
    est = resource_estimate(NET, fp16)
    assert (est.dsp, est.lut, est.ff, est.bram) == (224, 36458, 39326, 10)
    fp32 = replace(fp16, precision=parse_precision("fp32"))
    assert resource_estimate(NET, fp32).dsp == 712
    fp8 = replace(fp16, precision=parse_precision("fp8"))
    assert resource_estimate(NET, fp8).dsp == 15  # activation DSPs only


def test_simulate_identities():
    cfg = AccelConfig(U=15, f_mhz=250, platform=load_platform("u55c"))
    rep = simulate_network(NET, cfg)
    assert rep.latency_us == pytest.approx(rep.cycles / 250, rel=1e-12)
    assert rep.gops == pytest.approx(rep.ops / (rep.latency_us * 1e3), rel=1e-12)
    assert rep.cycles == sum(rep.breakdown.values())
    half = simulate_network(NET, replace(cfg, f_mhz=125))
    assert half.latency_us == pytest.approx(2 * rep.latency_us, rel=1e-12)
    one = simulate_network(NET, replace(cfg, U=1))
    assert rep.cycles < one.cycles <= 15 * rep.cycles


def test_default_latency_within_factor_two():
    rep = simulate_network(NET, AccelConfig(U=15, f_mhz=250))
    assert 0.71 <= rep.latency_us <= 2.84


def test_fit_overhead_hits_target():
    cfg = AccelConfig(U=15, f_mhz=250)
    oh = fit_overhead(NET, cfg, 1.42)
    rep = simulate_network(NET, replace(cfg, overheads=oh))
    assert rep.latency_us == pytest.approx(1.42, abs=2 / 250)


def test_published_calibration_latency():
    rep = simulate_network(NET, AccelConfig(U=15, f_mhz=250, calibration=published_calibration()))
    assert rep.latency_us == pytest.approx(1.42, rel=0.1)


def test_calibration_file_round_trip(tmp_path):
    cal = published_calibration()
    p = tmp_path / "cal.json"
    p.write_text(json.dumps(cal.to_mapping()))
    assert load_calibration(p).overhead_table == cal.overhead_table
    assert load_calibration("published").name == cal.name
    bumped = cal.with_overheads(UNIT_PARALLEL, "fp16", Overheads(layer_handoff=0))
    assert bumped.overheads(UNIT_PARALLEL, "fp16").layer_handoff == 0


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 32), st.integers(1, 32), st.integers(1, 3))
def test_cycles_monotone_in_u(h, i, depth):
    net = random_network(i, (h,) * depth, readout=True)
    cycles = [simulate_network(net, AccelConfig(U=u)).cycles for u in range(1, h + 1)]
    assert all(a >= b for a, b in zip(cycles, cycles[1:]))
