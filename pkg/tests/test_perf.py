import dataclasses

import pytest

from edgessm.archspec import ConfigError, Formulation, ModelConfig, VariantKind, with_layers
from edgessm.calibration import CALIBRATED
from edgessm.opgraph import OpKind, WorkloadSpec, model_totals
from edgessm.perf import (Bound, EmptyWorkload, HardwareConfig, Scenario, dump_hardware, evaluate,
                          load_hardware, peak_compute, regime_table, roofline_estimate,
                          state_update_block_point, sweep_batch, sweep_model_size, totals_for,
                          traffic_per_token)

HW = HardwareConfig()
SEQ = WorkloadSpec.prefill(Formulation.SEQUENTIAL)


def test_default_peaks_and_ridge():
    assert peak_compute(HW, OpKind.MATMUL) == 512e9
    assert peak_compute(HW, OpKind.CONV) == 512e9
    assert peak_compute(HW, OpKind.ELEMENTWISE) == 8e9
    assert peak_compute(HW, OpKind.SCAN_COMBINE) == 8e9
    assert HW.ridge_point == 512e9 / 34e9
    assert round(HW.ridge_point, 2) == 15.06


@pytest.mark.parametrize("field", ["mac_units", "clock_hz", "dram_bw_bytes_per_s", "sram_bytes", "e_mem_pj_per_bit"])
def test_non_positive_hardware_rejected(field):
    with pytest.raises(ConfigError):
        HardwareConfig(**{field: 0})


def test_unknown_mapping_rejected():
    with pytest.raises(ConfigError):
        HardwareConfig(mapping="magic")


def test_decode_traffic_approaches_state_bytes_for_large_batch():
    cfg = CALIBRATED[VariantKind.MAMBA2]
    small = totals_for(cfg, WorkloadSpec.decode(batch=1))
    huge_wl = WorkloadSpec.decode(batch=10**12)
    huge = totals_for(cfg, huge_wl)
    t = traffic_per_token(huge, huge_wl, HW)
    assert t == pytest.approx(huge.state_bytes_per_token, rel=1e-6)
    assert traffic_per_token(small, WorkloadSpec.decode(batch=1), HW) > t


def test_prefill_weights_amortized_over_sequence():
    cfg = CALIBRATED[VariantKind.MAMBA1]
    short = evaluate(cfg, WorkloadSpec.prefill(seq_len=64))
    long = evaluate(cfg, WorkloadSpec.prefill(seq_len=1024))
    assert short.traffic_bytes_per_token > long.traffic_bytes_per_token


def test_nothing_spills_with_huge_sram():
    cfg = CALIBRATED[VariantKind.MAMBA3]
    big = HardwareConfig(sram_bytes=1e15)
    totals = totals_for(cfg, SEQ, big)
    assert traffic_per_token(totals, SEQ, big) == pytest.approx(totals.weight_bytes_total / SEQ.seq_len)


@pytest.mark.parametrize("variant", list(VariantKind))
def test_latency_at_least_both_roofs(variant):
    cfg = CALIBRATED[variant]
    est = evaluate(cfg, SEQ)
    totals = totals_for(cfg, SEQ)
    assert est.latency_s_per_token >= totals.total_ops_per_token / HW.mac_peak * (1 - 1e-12)
    assert est.latency_s_per_token >= est.traffic_bytes_per_token / HW.dram_bw_bytes_per_s * (1 - 1e-12)


def test_energy_is_sum_of_compute_and_memory():
    est = evaluate(CALIBRATED[VariantKind.MAMBA2], SEQ)
    ops = est.ops_per_token * 1e9
    expected = (ops * HW.e_op_pj + est.traffic_bytes_per_token * 8 * HW.e_mem_pj_per_bit) * 1e-9
    assert est.energy_mj_per_token == pytest.approx(expected)


def test_doubling_memory_energy_doubles_only_the_memory_term():
    cfg = CALIBRATED[VariantKind.MAMBA1]
    base = evaluate(cfg, SEQ)
    dbl = evaluate(cfg, SEQ, HardwareConfig(e_mem_pj_per_bit=30))
    compute_part = base.ops_per_token * 1e9 * HW.e_op_pj * 1e-9
    assert dbl.energy_mj_per_token - compute_part == pytest.approx(2 * (base.energy_mj_per_token - compute_part))
    assert dbl.throughput_tok_per_s == base.throughput_tok_per_s


def test_bound_flips_at_ridge():
    cfg = CALIBRATED[VariantKind.MAMBA2]
    est = evaluate(cfg, SEQ)
    assert est.bound is Bound.COMPUTE
    slow_mem = HardwareConfig(dram_bw_bytes_per_s=est.traffic_bytes_per_token * est.ops_per_token * 1e9 / 1e12)
    assert evaluate(cfg, SEQ, slow_mem).bound is Bound.MEMORY
    assert evaluate(cfg, WorkloadSpec.decode(batch=1)).bound is Bound.MEMORY


def test_empty_workload_is_flagged():
    cfg = with_layers(CALIBRATED[VariantKind.MAMBA1], 0)
    est = evaluate(cfg, SEQ)
    assert est.empty and est.throughput_tok_per_s is None and est.bound is None
    with pytest.raises(EmptyWorkload):
        state_update_block_point(cfg, Scenario.EDGE_PREFILL)


def test_roofline_estimate_accepts_totals_directly():
    cfg = CALIBRATED[VariantKind.MAMBA1]
    direct = roofline_estimate(model_totals(cfg, SEQ), SEQ, HW)
    assert direct == evaluate(cfg, SEQ)


@pytest.mark.parametrize("change", [dict(mac_units=2048), dict(dram_bw_bytes_per_s=68e9), dict(clock_hz=500e6)])
def test_more_hardware_never_slower(change):
    for variant in VariantKind:
        for wl in (SEQ, WorkloadSpec.decode(batch=16)):
            base = evaluate(CALIBRATED[variant], wl)
            better = evaluate(CALIBRATED[variant], wl, HardwareConfig(**change))
            assert better.throughput_tok_per_s >= base.throughput_tok_per_s


def test_split_mapping_is_slower_than_unified():
    cfg = CALIBRATED[VariantKind.MAMBA3]
    assert (evaluate(cfg, SEQ, HardwareConfig(mapping="split")).throughput_tok_per_s
            < evaluate(cfg, SEQ).throughput_tok_per_s)


def test_regime_orderings():
    pts = {(p.variant, p.scenario): p for p in regime_table(CALIBRATED)}
    edge = [pts[(v, Scenario.EDGE_PREFILL)].normalized for v in VariantKind]
    dec = [pts[(v, Scenario.HYPERSCALE_DECODE)].normalized for v in VariantKind]
    assert edge[0] == 1.0 and edge[0] > edge[1] > edge[2]
    assert dec[0] < dec[1] < dec[2]


def test_single_variant_sweep_normalizes_to_one():
    rows = sweep_model_size([100e6], [VariantKind.MAMBA2])
    assert rows[0].normalized == {VariantKind.MAMBA2: 1.0}


def test_sweep_matches_parameters():
    row = sweep_model_size([50e6])[0]
    ref = row.params[VariantKind.MAMBA2]
    assert all(abs(p / ref - 1) <= 0.05 for p in row.params.values())


def test_sweep_rejects_tiny_sizes_and_unknown_mode():
    with pytest.raises(ConfigError):
        sweep_model_size([1e3])
    with pytest.raises(ConfigError):
        sweep_model_size([50e6], mode="guess")


def test_state_update_share_grows_as_models_shrink():
    shares = []
    for row in sweep_model_size([15e6, 100e6, 880e6], [VariantKind.MAMBA3]):
        cfg = row.configs[VariantKind.MAMBA3]
        t = model_totals(cfg, SEQ)
        shares.append(t.state_update_ops_per_token / t.total_ops_per_token)
    assert shares[0] > shares[1] > shares[2]


def test_decode_throughput_monotone_in_batch():
    res = sweep_batch(CALIBRATED[VariantKind.MAMBA3], [1, 4, 16, 64, 256, 1024])
    tput = [e.throughput_tok_per_s for _, e in res]
    assert tput == sorted(tput)
    ois = [e.model_oi for _, e in res]
    assert ois == sorted(ois)


def test_hardware_file_round_trip(tmp_path):
    hw = dataclasses.replace(HW, mapping="split", sram_bytes=4 * 2**20, dram_bw_bytes_per_s=17e9)
    path = tmp_path / "hw"
    path.write_text(dump_hardware(hw, "test"))
    assert load_hardware(path) == hw


def test_hardware_file_diagnostics(tmp_path):
    path = tmp_path / "hw"
    path.write_text("dram_bw_bytes_per_s = fast\n")
    with pytest.raises(ConfigError, match="dram_bw_bytes_per_s"):
        load_hardware(path)
