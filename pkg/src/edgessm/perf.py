"""Roofline, traffic and energy model of an edge accelerator.

Latency per token is a serial composition over fusion groups: each group
costs ``max(compute, memory)`` and the groups run one after another. With
``composition="max"`` the whole model is a single roofline instead.

Two compute mappings are available. ``unified`` (default) runs every op at
the MAC-array peak, which is what the compute-bound throughput figures of
the reference design imply. ``split`` sends MatMul/Conv to the MAC array
and everything else to the SIMD lanes.

Traffic (bytes per token):

* prefill: weights streamed once per pass (amortized over L); a boundary
  tensor between fusion groups is live for the whole sequence and goes to
  DRAM iff ``L * bytes_per_token`` exceeds the usable SRAM; recurrent state
  stays on chip.
* decode: weights amortized over the batch; recurrent state read and
  written every step; activations stay on chip.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, fields, replace
from pathlib import Path

from edgessm.archspec import (ConfigError, Formulation, ModelConfig, VariantKind, match_param_count,
                              param_count, parse_kv, width_quantum)
from edgessm.opgraph import (DEFAULT_CONVENTION, GroupTotals, OpConvention, OperatorNode, OpKind, OpTotals,
                             Phase, Role, WorkloadSpec, build_layer_graph, count_ops)

GIGA = 1e9


class Bound(enum.Enum):
    COMPUTE = "ComputeBound"
    MEMORY = "MemoryBound"


class Scenario(enum.Enum):
    EDGE_PREFILL = "EdgePrefill"
    HYPERSCALE_DECODE = "HyperscaleDecode"


class EmptyWorkload(Exception):
    """The evaluated graph performs no work; throughput is undefined."""


@dataclass(frozen=True)
class HardwareConfig:
    mac_units: int = 1024
    simd_lanes: int = 32
    clock_hz: float = 250e6
    sram_bytes: int = 2 * 2**20
    dram_bw_bytes_per_s: float = 34e9
    e_mem_pj_per_bit: float = 15.0
    e_op_pj: float = 2.0
    weight_bits: int = 16
    act_bits: int = 16
    state_bits: int = 16
    mapping: str = "unified"
    composition: str = "serial"
    sram_reserve: float = 0.0

    def __post_init__(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, (int, float)) and f.name != "sram_reserve" and not v > 0:
                raise ConfigError(f"{f.name} must be strictly positive, got {v}")
        if self.mapping not in ("unified", "split"):
            raise ConfigError(f"mapping must be 'unified' or 'split', got {self.mapping!r}")
        if self.composition not in ("serial", "max"):
            raise ConfigError(f"composition must be 'serial' or 'max', got {self.composition!r}")
        if not 0.0 <= self.sram_reserve < 1.0:
            raise ConfigError(f"sram_reserve must be in [0, 1), got {self.sram_reserve}")

    @property
    def widths(self) -> tuple[int, int, int]:
        return self.weight_bits, self.act_bits, self.state_bits

    @property
    def mac_peak(self) -> float:
        return self.mac_units * 2 * self.clock_hz

    @property
    def simd_peak(self) -> float:
        return self.simd_lanes * self.clock_hz

    @property
    def ridge_point(self) -> float:
        return self.mac_peak / self.dram_bw_bytes_per_s

    @property
    def usable_sram(self) -> float:
        return self.sram_bytes * (1.0 - self.sram_reserve)


def peak_compute(hw: HardwareConfig, kind: OpKind) -> float:
    """Peak ops/s of the array that natively executes ``kind``."""
    return hw.mac_peak if kind.on_mac_array else hw.simd_peak


def _simd_rate(hw: HardwareConfig) -> float:
    return hw.mac_peak if hw.mapping == "unified" else hw.simd_peak


@dataclass(frozen=True)
class PerfEstimate:
    ops_per_token: float
    state_update_ops: float
    oi_ops_per_byte: float
    throughput_tok_per_s: float | None
    latency_s_per_token: float
    energy_mj_per_token: float
    bound: Bound | None
    traffic_bytes_per_token: float = 0.0
    model_oi: float = 0.0

    @property
    def empty(self) -> bool:
        return self.throughput_tok_per_s is None


# -- traffic --------------------------------------------------------------------------------------

def group_traffic(group: GroupTotals, workload: WorkloadSpec, hw: HardwareConfig,
                  n_layers: int) -> float:
    """DRAM bytes per token charged to one fusion group (all layers)."""
    if workload.phase is Phase.PREFILL:
        weights = group.weight_bytes / workload.seq_len
        spilled = sum(b for b in group.tensor_bytes if workload.seq_len * b > hw.usable_sram)
        return weights + n_layers * spilled
    return group.weight_bytes / workload.batch + group.state_bytes


def traffic_per_token(totals: OpTotals, workload: WorkloadSpec, hw: HardwareConfig) -> float:
    return sum(group_traffic(g, workload, hw, totals.n_layers) for g in totals.groups)


def state_update_traffic(totals: OpTotals, workload: WorkloadSpec, hw: HardwareConfig) -> float:
    return sum(group_traffic(g, workload, hw, totals.n_layers)
               for g in totals.groups if g.has_state_update)


def state_update_oi(totals: OpTotals, workload: WorkloadSpec, hw: HardwareConfig) -> float:
    traffic = state_update_traffic(totals, workload, hw)
    return totals.state_update_ops_per_token / traffic if traffic else math.inf


# -- roofline -------------------------------------------------------------------------------------

def _compute_time(mac_ops: float, simd_ops: float, hw: HardwareConfig) -> float:
    return mac_ops / hw.mac_peak + simd_ops / _simd_rate(hw)


def roofline_estimate(totals: OpTotals, workload: WorkloadSpec, hw: HardwareConfig) -> PerfEstimate:
    """Per-token latency, throughput, OI and energy of a model on ``hw``.

    An empty model yields an estimate whose ``empty`` flag is set and whose
    throughput is ``None``.
    """
    traffic = traffic_per_token(totals, workload, hw)
    ops = totals.total_ops_per_token
    energy = (ops * hw.e_op_pj + traffic * 8 * hw.e_mem_pj_per_bit) * 1e-9
    if totals.is_empty:
        return PerfEstimate(0.0, 0.0, 0.0, None, 0.0, energy, None, traffic, 0.0)
    if hw.composition == "serial":
        latency = 0.0
        for g in totals.groups:
            t_c = _compute_time(g.mac_ops, g.simd_ops, hw)
            t_m = group_traffic(g, workload, hw, totals.n_layers) / hw.dram_bw_bytes_per_s
            latency += max(t_c, t_m)
    else:
        latency = max(_compute_time(totals.mac_ops_per_token, totals.simd_ops_per_token, hw),
                      traffic / hw.dram_bw_bytes_per_s)
    model_oi = ops / traffic if traffic else math.inf
    bound = Bound.COMPUTE if model_oi >= hw.ridge_point else Bound.MEMORY
    return PerfEstimate(
        ops_per_token=ops / GIGA,
        state_update_ops=totals.state_update_ops_per_token / GIGA,
        oi_ops_per_byte=state_update_oi(totals, workload, hw),
        throughput_tok_per_s=1.0 / latency,
        latency_s_per_token=latency,
        energy_mj_per_token=energy,
        bound=bound,
        traffic_bytes_per_token=traffic,
        model_oi=model_oi,
    )


def evaluate(config: ModelConfig, workload: WorkloadSpec, hw: HardwareConfig | None = None, *,
             convention: OpConvention = DEFAULT_CONVENTION) -> PerfEstimate:
    hw = hw or HardwareConfig()
    graph = build_layer_graph(config, workload, widths=hw.widths, convention=convention)
    return roofline_estimate(count_ops(graph, config), workload, hw)


def totals_for(config: ModelConfig, workload: WorkloadSpec, hw: HardwareConfig | None = None, *,
               convention: OpConvention = DEFAULT_CONVENTION) -> OpTotals:
    hw = hw or HardwareConfig()
    return count_ops(build_layer_graph(config, workload, widths=hw.widths, convention=convention),
                     config)


# -- deployment regimes of the state-update block ------------------------------------------------

EDGE_PREFILL_FORMULATION = {
    VariantKind.MAMBA1: Formulation.SEQUENTIAL,
    VariantKind.MAMBA2: Formulation.SSD,
    VariantKind.MAMBA3: Formulation.SSD,
}


@dataclass(frozen=True)
class RegimePoint:
    variant: VariantKind
    scenario: Scenario
    state_update_ops: float
    traffic_bytes: float
    oi: float
    throughput: float
    normalized: float = 1.0


def node_traffic(node: OperatorNode, workload: WorkloadSpec, hw: HardwareConfig) -> float:
    """DRAM bytes per token (one layer) charged to a single operator."""
    if workload.phase is Phase.PREFILL:
        spilled = sum(b for b in node.tensors if workload.seq_len * b > hw.usable_sram)
        return node.weight_bytes / workload.seq_len + spilled
    return node.weight_bytes / workload.batch + node.state_bytes


def state_update_block_point(config: ModelConfig, scenario: Scenario, hw: HardwareConfig | None = None,
                             *, seq_len: int = 2048, batch: int = 1024,
                             formulation: Formulation | None = None) -> RegimePoint:
    """Roofline throughput of the state-update operators alone.

    Operators are composed serially, each at ``max(compute, memory)``.
    """
    hw = hw or HardwareConfig()
    if scenario is Scenario.EDGE_PREFILL:
        form = formulation or EDGE_PREFILL_FORMULATION[config.variant]
        wl = WorkloadSpec.prefill(form, seq_len=seq_len, batch=1)
    else:
        wl = WorkloadSpec.decode(batch=batch, seq_len=seq_len)
    graph = build_layer_graph(config, wl, widths=hw.widths)
    n = config.n_layers
    ops = traffic = latency = 0.0
    for node in graph.nodes:
        if node.role is not Role.STATE_UPDATE:
            continue
        mac = node.ops_per_token if node.kind.on_mac_array else 0.0
        simd = node.ops_per_token - mac
        bytes_ = node_traffic(node, wl, hw)
        ops += n * node.ops_per_token
        traffic += n * bytes_
        latency += n * max(_compute_time(mac, simd, hw), bytes_ / hw.dram_bw_bytes_per_s)
    if ops == 0:
        raise EmptyWorkload(f"{config.variant.label} has no state-update work")
    return RegimePoint(config.variant, scenario, ops, traffic, ops / traffic if traffic else math.inf,
                       1.0 / latency)


def state_update_regime_throughput(variant: VariantKind, config: ModelConfig, scenario: Scenario,
                                   hw: HardwareConfig | None = None, *,
                                   baseline: ModelConfig | None = None, **kw) -> float:
    """State-update throughput of ``config`` normalized to a Mamba-1 ``baseline``.

    The baseline defaults to the shipped calibrated Mamba-1 configuration.
    """
    if config.variant is not variant:
        raise ConfigError(f"config is {config.variant.label}, expected {variant.label}")
    if baseline is None:
        from edgessm.calibration import calibrated_config
        baseline = calibrated_config(VariantKind.MAMBA1)
    ref = state_update_block_point(baseline, scenario, hw, **kw)
    return state_update_block_point(config, scenario, hw, **kw).throughput / ref.throughput


def regime_table(configs: dict[VariantKind, ModelConfig], hw: HardwareConfig | None = None,
                 baseline: VariantKind = VariantKind.MAMBA1, **kw) -> list[RegimePoint]:
    out = []
    for scenario in Scenario:
        pts = {v: state_update_block_point(c, scenario, hw, **kw) for v, c in configs.items()}
        ref = pts[baseline].throughput
        out.extend(replace(p, normalized=p.throughput / ref) for p in pts.values())
    return out


# -- sweeps ----------------------------------------------------------------------------------------

@dataclass(frozen=True)
class StreamTrend:
    """Linear latency correction fitted to the mapped (non-roofline) results.

    latency = proj_s_per_gop * (total - state_update) + su_s_per_gop * state_update,
    with op counts in GOps/token. Constants from :mod:`edgessm.calibration`.
    """

    proj_s_per_gop: float
    su_s_per_gop: float

    def latency(self, est: PerfEstimate) -> float:
        return (self.proj_s_per_gop * (est.ops_per_token - est.state_update_ops)
                + self.su_s_per_gop * est.state_update_ops)


@dataclass(frozen=True)
class SweepRow:
    target_params: float
    configs: dict
    params: dict
    latency: dict
    normalized: dict
    mode: str


SWEEP_VOCAB = 0
SWEEP_ASPECT = 32


def reference_mamba2(target_params: float, *, vocab_size: int = SWEEP_VOCAB,
                     aspect: int = SWEEP_ASPECT, d_state: int = 64,
                     head_dim: int = 64) -> ModelConfig:
    """Mamba-2 model of about ``target_params`` parameters.

    Sizes exclude the embedding unless ``vocab_size`` is given.

    Width and depth follow ``d_model = aspect * n_layers``; the width is
    rounded so that it and its half split into whole heads, and the depth is
    then re-fitted to the target.
    """
    if target_params < 1e6:
        raise ConfigError(f"sweep sizes must be >= 1M parameters, got {target_params:g}")
    # twice the Mamba-3 quantum, so that halving the width stays on whole heads
    q = 2 * width_quantum(VariantKind.MAMBA3, head_dim)

    def build(d, n):
        return ModelConfig.mamba2(d, n, d_state, head_dim=head_dim, vocab_size=vocab_size)

    lo, hi = 1.0, 1024.0
    for _ in range(60):
        mid = (lo + hi) / 2
        d = max(q, round(aspect * mid / q) * q)
        if param_count(build(d, max(1, round(mid)))) < target_params:
            lo = mid
        else:
            hi = mid
    d = max(q, round(aspect * lo / q) * q)
    fixed = param_count(build(d, 0))
    per_layer = param_count(build(d, 1)) - fixed
    n_layers = max(1, round((target_params - fixed) / per_layer))
    return build(d, n_layers)


def sweep_model_size(sizes: list[float], variants: list[VariantKind] | None = None,
                     hw: HardwareConfig | None = None, *, mode: str = "roofline",
                     normalize_to: VariantKind = VariantKind.MAMBA2, seq_len: int = 2048,
                     tolerance: float = 0.05, trend: StreamTrend | None = None,
                     vocab_size: int = SWEEP_VOCAB) -> list[SweepRow]:
    """Parameter-matched latency per variant, normalized per size.

    The Mamba-2 reference at each size comes from :func:`reference_mamba2`;
    the other variants are matched to it with :func:`match_param_count`,
    sharing its state size.

    ``mode="roofline"`` uses the roofline latency; ``mode="stream-trend"``
    applies the linear mapped-latency correction. The normalization variant
    is always evaluated even if not requested.
    """
    hw = hw or HardwareConfig()
    variants = list(variants or [VariantKind.MAMBA1, VariantKind.MAMBA2, VariantKind.MAMBA3])
    if mode not in ("roofline", "stream-trend"):
        raise ConfigError(f"unknown sweep mode {mode!r}")
    if mode == "stream-trend" and trend is None:
        from edgessm.calibration import STREAM_TREND
        trend = STREAM_TREND
    rows = []
    for size in sizes:
        ref = reference_mamba2(size, vocab_size=vocab_size)
        configs = {}
        for v in dict.fromkeys(variants + [normalize_to]):
            configs[v] = ref if v is VariantKind.MAMBA2 else match_param_count(v, ref, tolerance=tolerance)
        latency = {}
        for v, cfg in configs.items():
            est = evaluate(cfg, WorkloadSpec.prefill(Formulation.SEQUENTIAL, seq_len=seq_len), hw)
            latency[v] = est.latency_s_per_token if mode == "roofline" else trend.latency(est)
        base = latency[normalize_to]
        rows.append(SweepRow(size, {v: configs[v] for v in variants},
                             {v: param_count(configs[v]) for v in variants},
                             {v: latency[v] for v in variants},
                             {v: latency[v] / base for v in variants}, mode))
    return rows


def sweep_batch(config: ModelConfig, batches: list[int], hw: HardwareConfig | None = None, *,
                seq_len: int = 2048) -> list[tuple[int, PerfEstimate]]:
    """Decode estimates over batch sizes (weights amortized across the batch)."""
    hw = hw or HardwareConfig()
    return [(b, evaluate(config, WorkloadSpec.decode(batch=b, seq_len=seq_len), hw)) for b in batches]


# -- hardware config files -----------------------------------------------------------------------

def hardware_from_dict(values: dict[str, str], source: str = "<string>") -> HardwareConfig:
    known = {f.name: f for f in fields(HardwareConfig)}
    kw = {}
    for key, raw in values.items():
        if key not in known:
            raise ConfigError(f"{source}: unknown key '{key}'")
        default = known[key].default
        try:
            if isinstance(default, str):
                kw[key] = raw
            elif isinstance(default, int):
                kw[key] = int(float(raw)) if float(raw).is_integer() else int(raw)
            else:
                kw[key] = float(raw)
        except ValueError:
            raise ConfigError(f"{source}: key '{key}' has invalid value {raw!r}") from None
    try:
        return HardwareConfig(**kw)
    except ConfigError as exc:
        raise ConfigError(f"{source}: {exc}") from None


def load_hardware(path: str | Path) -> HardwareConfig:
    path = Path(path)
    return hardware_from_dict(parse_kv(path.read_text(), str(path)), str(path))


def dump_hardware(hw: HardwareConfig, comment: str | None = None) -> str:
    lines = [f"# {comment}"] if comment else []
    for f in fields(hw):
        v = getattr(hw, f.name)
        lines.append(f"{f.name} = {v:g}" if isinstance(v, float) else f"{f.name} = {v}")
    return "\n".join(lines) + "\n"
