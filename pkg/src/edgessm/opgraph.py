"""Per-layer operator inventories and per-token op / byte accounting.

Conventions (see :class:`OpConvention`): a multiply-accumulate is two
ops, a transcendental costs ``transcendental_ops`` (calibrated default 0,
i.e. the exp/sigmoid/log evaluations are treated as table lookups), and
normalizations and residual adds cost one op per element.

The counted model is the stack of Mamba layers. Embedding lookup and the
tied logits projection sit outside the per-layer inventory and are not
counted in the op totals (their parameters still count in archspec).

Each operator belongs to a fusion group. Tensors passed between groups are
the ``act_in_bytes`` / ``act_out_bytes`` of the reading / writing operator
(listed one by one in ``OperatorNode.tensors``); tensors internal to a
group are never charged. Whether a boundary tensor reaches DRAM is decided
by :mod:`edgessm.perf`.

State-update inventory, per token per layer (S = Di*N for Mamba-1,
S = H*P*N for Mamba-2/3, R the MIMO rank, Xw = R*Di):

Mamba-1 (sequential)
    discretize_a   dA = delta (x) A, exp            S mul + S trans
    discretize_b   dB = delta (x) B, times u         2S mul
    state_update   h = Abar*h + Bx                  S mul + S add
    readout        y_i = <h_i, C>                   S mul + S add
Mamba-2/3 (sequential)
    decay          a = exp(dt*A)                    H mul + H trans
    state_update   Xs = dt*X; h = a*h + Xs B^T       Xw mul + S mul + R*S mac
    readout        Y = h C                          R*S mac
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field

from edgessm.archspec import ConfigError, Formulation, ModelConfig, VariantKind, formulation_allowed
from edgessm.oracle import combine_count


class Phase(enum.Enum):
    PREFILL = "prefill"
    DECODE = "decode"


class OpKind(enum.Enum):
    MATMUL = "MatMul"
    CONV = "Conv"
    ELEMENTWISE = "Elementwise"
    NONLINEARITY = "Nonlinearity"
    SCAN_COMBINE = "ScanCombine"

    @property
    def on_mac_array(self) -> bool:
        return self in (OpKind.MATMUL, OpKind.CONV)


class Role(enum.Enum):
    STATE_UPDATE = "StateUpdate"
    PROJECTION = "Projection"
    OTHER = "Other"


@dataclass(frozen=True)
class OpConvention:
    mac_ops: float = 2.0
    transcendental_ops: float = 0.0
    norm_ops_per_element: float = 1.0

    def __post_init__(self):
        if self.mac_ops <= 0 or self.transcendental_ops < 0 or self.norm_ops_per_element < 0:
            raise ConfigError("op convention weights must be non-negative (mac_ops > 0)")


DEFAULT_CONVENTION = OpConvention()


@dataclass(frozen=True)
class WorkloadSpec:
    phase: Phase = Phase.PREFILL
    batch: int = 1
    seq_len: int = 2048
    formulation: Formulation = Formulation.SEQUENTIAL
    chunk_size: int = 64

    def __post_init__(self):
        for name in ("batch", "seq_len", "chunk_size"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be a positive integer, got {getattr(self, name)}")
        if self.phase is Phase.DECODE and self.formulation is not Formulation.SEQUENTIAL:
            raise ConfigError(f"{self.formulation.label} is a prefill-only formulation; decode is sequential")

    @classmethod
    def prefill(cls, formulation: Formulation = Formulation.SEQUENTIAL, seq_len: int = 2048,
                batch: int = 1, chunk_size: int = 64) -> "WorkloadSpec":
        return cls(Phase.PREFILL, batch, seq_len, formulation, chunk_size)

    @classmethod
    def decode(cls, batch: int = 1, seq_len: int = 2048) -> "WorkloadSpec":
        return cls(Phase.DECODE, batch, seq_len, Formulation.SEQUENTIAL)


@dataclass(frozen=True)
class OperatorNode:
    name: str
    kind: OpKind
    ops_per_token: float
    weight_bytes: int
    act_in_bytes: int
    act_out_bytes: int
    state_bytes: int
    role: Role
    group: str = ""
    tensors: tuple[int, ...] = ()

    def __post_init__(self):
        if self.ops_per_token < 0:
            raise ValueError(f"{self.name}: negative op count")
        if min(self.weight_bytes, self.act_in_bytes, self.act_out_bytes, self.state_bytes) < 0:
            raise ValueError(f"{self.name}: negative byte count")

    @property
    def act_bytes(self) -> int:
        return self.act_in_bytes + self.act_out_bytes


@dataclass(frozen=True)
class LayerGraph:
    nodes: tuple[OperatorNode, ...]
    n_layers: int
    workload: WorkloadSpec

    def __iter__(self):
        return iter(self.nodes)

    def __len__(self):
        return len(self.nodes)

    def node(self, name: str) -> OperatorNode:
        for n in self.nodes:
            if n.name == name:
                return n
        raise KeyError(name)

    def groups(self) -> list[str]:
        seen: list[str] = []
        for n in self.nodes:
            if n.group not in seen:
                seen.append(n.group)
        return seen


@dataclass(frozen=True)
class GroupTotals:
    """Model-wide (all layers) aggregate of one fusion group, per token."""

    name: str
    mac_ops: float
    simd_ops: float
    state_update_ops: float
    weight_bytes: float
    act_bytes: float
    state_bytes: float
    tensor_bytes: tuple[int, ...] = ()

    @property
    def ops(self) -> float:
        return self.mac_ops + self.simd_ops

    @property
    def has_state_update(self) -> bool:
        return self.state_update_ops > 0


@dataclass(frozen=True)
class OpTotals:
    total_ops_per_token: float = 0.0
    state_update_ops_per_token: float = 0.0
    weight_bytes_total: float = 0.0
    act_bytes_per_token: float = 0.0
    state_bytes_per_token: float = 0.0
    projection_ops_per_token: float = 0.0
    mac_ops_per_token: float = 0.0
    simd_ops_per_token: float = 0.0
    groups: tuple[GroupTotals, ...] = ()
    n_layers: int = 0

    @property
    def is_empty(self) -> bool:
        return self.total_ops_per_token == 0


# -- inventory builders -------------------------------------------------------------------------

class _Builder:
    def __init__(self, wbytes: float, abytes: float, sbytes: float):
        self.wb, self.ab, self.sb = wbytes, abytes, sbytes
        self.nodes: list[OperatorNode] = []
        self.group = ""

    def add(self, name, kind, ops, role, *, weights=0, act_in=(), act_out=(), state=0):
        """``act_in`` / ``act_out`` list the element counts of each boundary tensor."""
        act_in = tuple(act_in) if isinstance(act_in, (tuple, list)) else (act_in,)
        act_out = tuple(act_out) if isinstance(act_out, (tuple, list)) else (act_out,)
        tensors = tuple(int(round(e * self.ab)) for e in act_in + act_out if e)
        self.nodes.append(OperatorNode(
            name, kind, float(ops), int(round(weights * self.wb)),
            sum(int(round(e * self.ab)) for e in act_in), sum(int(round(e * self.ab)) for e in act_out),
            int(round(state * self.sb)), role, self.group, tensors))


def _mamba1_nodes(cfg: ModelConfig, wl: WorkloadSpec, cv: OpConvention, b: _Builder) -> None:
    D, Di, N, K, r = cfg.d_model, cfg.d_inner, cfg.d_state, cfg.d_conv, cfg.dt_rank
    m, t, nrm = cv.mac_ops, cv.transcendental_ops, cv.norm_ops_per_element
    S = Di * N
    decode = wl.phase is Phase.DECODE
    MM, EW, NL = OpKind.MATMUL, OpKind.ELEMENTWISE, OpKind.NONLINEARITY
    P_, SU, O = Role.PROJECTION, Role.STATE_UPDATE, Role.OTHER

    b.group = "in"
    b.add("norm", EW, nrm * D, O, weights=D, act_in=D)
    b.add("in_proj", MM, m * D * 2 * Di, P_, weights=D * 2 * Di, act_out=(Di, Di))
    b.group = "mix"
    b.add("conv1d", OpKind.CONV, m * K * Di + Di, O, weights=K * Di + Di, act_in=Di,
          state=2 * (K - 1) * Di if decode else 0)
    b.add("silu", NL, Di * (t + 1), O, act_out=Di)
    b.add("x_proj", MM, m * Di * (r + 2 * N), P_, weights=Di * (r + 2 * N), act_out=(N, N))
    b.add("dt_proj", MM, m * r * Di + Di, P_, weights=r * Di + Di)
    b.add("softplus", NL, Di * (2 * t + 1), O, act_out=Di)
    b.group = "ssm"
    b.add("discretize_a", EW, S * (1 + t), SU, weights=S, act_in=Di)
    b.add("discretize_b", EW, 2 * S, SU, act_in=(N, Di))
    if wl.formulation is Formulation.PSCAN:
        L = wl.seq_len
        ops = (2 * S + 3 * S * combine_count(L)) / L
        b.add("pscan", OpKind.SCAN_COMBINE, ops, SU)
    else:
        b.add("state_update", EW, 2 * S, SU, state=2 * S if decode else 0)
    b.add("readout", EW, 2 * S, SU, act_in=N)
    b.add("skip", EW, 2 * Di, O, weights=Di)
    b.add("gate", NL, Di * (t + 2), O, act_in=Di, act_out=Di)
    b.group = "out"
    b.add("out_proj", MM, m * Di * D, P_, weights=Di * D, act_in=Di)
    b.add("residual", EW, nrm * D, O, act_in=D, act_out=D)


def ssd_chunk_len(chunk_size: int, mimo_rank: int) -> int:
    """Tokens per SSD chunk: the score block spans ``chunk_size`` rank-rows."""
    return max(1, chunk_size // mimo_rank)


def ssd_chunk_ops(c: int, H: int, P: int, N: int, R: int, cv: OpConvention) -> dict[str, float]:
    """Arithmetic of one SSD chunk of ``c`` tokens over all heads, by stage."""
    m = cv.mac_ops
    return {
        "ssd_decay_mask": H * (c * (c - 1) / 2 + c),
        "ssd_scores": H * (m * c * c * R * R * N + c * c * R * R),
        "ssd_intra": H * m * c * c * P * R * R,
        "ssd_chunk_state": H * (c * P * R + m * P * N * c * R),
        "ssd_state_passing": H * 2 * P * N,
        "ssd_state_output": H * (m * c * P * R * N + 2 * c * P * R),
    }


def _scalar_decay_nodes(cfg: ModelConfig, wl: WorkloadSpec, cv: OpConvention, b: _Builder) -> None:
    D, Di, N, K = cfg.d_model, cfg.d_inner, cfg.d_state, cfg.d_conv
    H, P, R = cfg.n_heads, cfg.head_dim, cfg.mimo_rank
    Xw = R * Di
    S = H * P * N
    m, t, nrm = cv.mac_ops, cv.transcendental_ops, cv.norm_ops_per_element
    decode = wl.phase is Phase.DECODE
    has_conv = cfg.variant is VariantKind.MAMBA2
    MM, EW, NL = OpKind.MATMUL, OpKind.ELEMENTWISE, OpKind.NONLINEARITY
    P_, SU, O = Role.PROJECTION, Role.STATE_UPDATE, Role.OTHER
    in_w = 2 * Xw + 2 * N * R + H

    b.group = "in"
    b.add("norm", EW, nrm * D, O, weights=D, act_in=D)
    b.add("in_proj", MM, m * D * in_w, P_, weights=D * in_w,
          act_out=(Xw, Xw + 2 * N * R, H) if has_conv else (Xw, Xw, N * R, N * R, H))
    if has_conv:
        ch = Xw + 2 * N * R
        b.group = "mix"
        b.add("conv1d", OpKind.CONV, m * K * ch + ch, O, weights=K * ch + ch, act_in=ch,
              state=2 * (K - 1) * ch if decode else 0)
        b.add("silu", NL, ch * (t + 1), O, act_out=(Xw, N * R, N * R))

    if wl.formulation is Formulation.SSD:
        L = wl.seq_len
        c = ssd_chunk_len(wl.chunk_size, R)
        n_chunks = math.ceil(L / c)
        per_chunk = ssd_chunk_ops(c, H, P, N, R, cv)
        chunk_states = S / c            # one H*P*N state per chunk, per token
        b.group = "ssd_chunk_state"
        b.add("dt_softplus", NL, H * (2 * t + 2), O, weights=H, act_in=H)
        b.add("decay", EW, H * (1 + t), SU, weights=H)
        b.add("dt_scale", EW, Xw, SU, act_in=(Xw, N * R))
        b.add("ssd_decay_mask", EW, per_chunk["ssd_decay_mask"] * n_chunks / L, SU)
        b.add("ssd_chunk_state", MM, per_chunk["ssd_chunk_state"] * n_chunks / L, SU,
              act_out=chunk_states)
        b.group = "ssd_state_passing"
        b.add("ssd_state_passing", EW, per_chunk["ssd_state_passing"] * n_chunks / L, SU,
              act_in=chunk_states, act_out=chunk_states)
        b.group = "ssd_chunk_scan"
        b.add("ssd_scores", MM, per_chunk["ssd_scores"] * n_chunks / L, SU,
              act_in=(N * R, N * R, H))
        b.add("ssd_intra", MM, per_chunk["ssd_intra"] * n_chunks / L, SU, act_in=Xw)
        b.add("ssd_state_output", MM, per_chunk["ssd_state_output"] * n_chunks / L, SU,
              act_in=chunk_states)
    else:
        b.group = "ssm"
        b.add("dt_softplus", NL, H * (2 * t + 2), O, weights=H, act_in=H)
        b.add("decay", EW, H * (1 + t), SU, weights=H)
        b.add("state_update", EW, Xw + S + m * R * S, SU, act_in=(Xw, N * R),
              state=2 * S if decode else 0)
        b.add("readout", EW, m * R * S, SU, act_in=N * R)
    b.add("skip", EW, 2 * Xw, O, weights=H)
    b.add("gated_norm", NL, Xw * (t + 2 + nrm), O, weights=Xw, act_in=Xw, act_out=Xw)
    b.group = "out"
    b.add("out_proj", MM, m * Xw * D, P_, weights=Xw * D, act_in=Xw)
    b.add("residual", EW, nrm * D, O, act_in=D, act_out=D)


def build_layer_graph(config: ModelConfig, workload: WorkloadSpec, *,
                      widths: tuple[int, int, int] = (16, 16, 16),
                      convention: OpConvention = DEFAULT_CONVENTION) -> LayerGraph:
    """Operator inventory of one layer.

    ``widths`` are the (weight, activation, state) datatype widths in bits.
    A model with zero layers yields an empty graph.
    """
    if not formulation_allowed(config.variant, workload.formulation):
        raise ConfigError(f"{workload.formulation.label} formulation is not defined for "
                          f"{config.variant.label}")
    if config.n_layers == 0:
        return LayerGraph((), 0, workload)
    wbits, abits, sbits = widths
    b = _Builder(wbits / 8, abits / 8, sbits / 8)
    if config.variant is VariantKind.MAMBA1:
        _mamba1_nodes(config, workload, convention, b)
    else:
        _scalar_decay_nodes(config, workload, convention, b)
    return LayerGraph(tuple(b.nodes), config.n_layers, workload)


def count_ops(graph: LayerGraph, config: ModelConfig | None = None) -> OpTotals:
    """Fold a layer graph into model-wide per-token totals."""
    n = graph.n_layers if config is None else config.n_layers
    if not graph.nodes or n == 0:
        return OpTotals()
    groups = []
    for g in graph.groups():
        members = [x for x in graph.nodes if x.group == g]
        groups.append(GroupTotals(
            name=g,
            mac_ops=n * sum(x.ops_per_token for x in members if x.kind.on_mac_array),
            simd_ops=n * sum(x.ops_per_token for x in members if not x.kind.on_mac_array),
            state_update_ops=n * sum(x.ops_per_token for x in members if x.role is Role.STATE_UPDATE),
            weight_bytes=n * sum(x.weight_bytes for x in members),
            act_bytes=n * sum(x.act_bytes for x in members),
            state_bytes=n * sum(x.state_bytes for x in members),
            tensor_bytes=tuple(b for x in members for b in x.tensors),
        ))
    nodes = graph.nodes
    return OpTotals(
        total_ops_per_token=n * sum(x.ops_per_token for x in nodes),
        state_update_ops_per_token=n * sum(x.ops_per_token for x in nodes if x.role is Role.STATE_UPDATE),
        weight_bytes_total=n * sum(x.weight_bytes for x in nodes),
        act_bytes_per_token=n * sum(x.act_bytes for x in nodes),
        state_bytes_per_token=n * sum(x.state_bytes for x in nodes),
        projection_ops_per_token=n * sum(x.ops_per_token for x in nodes if x.role is Role.PROJECTION),
        mac_ops_per_token=n * sum(x.ops_per_token for x in nodes if x.kind.on_mac_array),
        simd_ops_per_token=n * sum(x.ops_per_token for x in nodes if not x.kind.on_mac_array),
        groups=tuple(groups),
        n_layers=n,
    )


def model_totals(config: ModelConfig, workload: WorkloadSpec, **kw) -> OpTotals:
    return count_ops(build_layer_graph(config, workload, **kw), config)


def parallel_formulation(variant: VariantKind) -> Formulation:
    return Formulation.PSCAN if variant is VariantKind.MAMBA1 else Formulation.SSD


def formulation_overhead(config: ModelConfig, L: int, Q: int = 64, *,
                         convention: OpConvention = DEFAULT_CONVENTION) -> float:
    """State-update ops of the parallel formulation relative to sequential."""
    if L < 1:
        raise ConfigError("sequence length must be >= 1")
    probe = config if config.n_layers > 0 else config.__class__(**{**config.__dict__, "n_layers": 1})
    seq = model_totals(probe, WorkloadSpec.prefill(Formulation.SEQUENTIAL, L, chunk_size=Q),
                       convention=convention)
    par = model_totals(probe, WorkloadSpec.prefill(parallel_formulation(config.variant), L,
                                                   chunk_size=Q), convention=convention)
    return par.state_update_ops_per_token / seq.state_update_ops_per_token


def dump_graph(graph: LayerGraph, fmt: str = "text") -> str:
    """Stable listing of a graph for golden-file comparison."""
    rows = [{"name": n.name, "group": n.group, "kind": n.kind.value, "role": n.role.value,
             "ops": n.ops_per_token, "weight_bytes": n.weight_bytes,
             "act_in_bytes": n.act_in_bytes, "act_out_bytes": n.act_out_bytes,
             "state_bytes": n.state_bytes} for n in graph.nodes]
    if fmt == "json":
        return json.dumps({"n_layers": graph.n_layers, "nodes": rows}, indent=1, sort_keys=True)
    lines = [f"# n_layers={graph.n_layers}"]
    for r in rows:
        lines.append("{name:<18} {group:<18} {kind:<12} {role:<12} {ops:>16.3f} {weight_bytes:>10d} "
                     "{act_in_bytes:>7d} {act_out_bytes:>7d} {state_bytes:>8d}".format(**r))
    return "\n".join(lines) + "\n"
