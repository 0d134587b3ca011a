"""Analytical edge-accelerator performance model of Mamba-1/2/3 variants."""

from edgessm.archspec import (ConfigError, Formulation, MatchingError, ModelConfig, VariantKind,
                              load_config, match_param_count, param_count)
from edgessm.opgraph import OpTotals, Phase, WorkloadSpec, build_layer_graph, count_ops
from edgessm.perf import HardwareConfig, PerfEstimate, evaluate, roofline_estimate

__all__ = [
    "ConfigError", "Formulation", "HardwareConfig", "MatchingError", "ModelConfig", "OpTotals",
    "PerfEstimate", "Phase", "VariantKind", "WorkloadSpec", "build_layer_graph", "count_ops",
    "evaluate", "load_config", "match_param_count", "param_count", "roofline_estimate",
]
