"""
Where the operations go
=======================

Build the per-layer operator inventory of each calibrated model and see
how much of it is projection work and how much is the state update.
"""

from edgessm.archspec import Formulation, VariantKind, param_count
from edgessm.calibration import CALIBRATED
from edgessm.opgraph import Role, WorkloadSpec, build_layer_graph, dump_graph, model_totals

spacer = "_" * 72

###############################################################################
# One Mamba-1 layer, node by node. The columns are name, fusion group,
# operator kind, role, ops per token, then weight / activation / state bytes.
m1 = CALIBRATED[VariantKind.MAMBA1]
print(dump_graph(build_layer_graph(m1, WorkloadSpec.prefill())))
print(spacer)

###############################################################################
# Model totals per token, split by role.
for variant, cfg in CALIBRATED.items():
    t = model_totals(cfg, WorkloadSpec.prefill())
    su_share = t.state_update_ops_per_token / t.total_ops_per_token
    print(f"{variant.label}: {param_count(cfg) / 1e6:.0f}M params, "
          f"{t.total_ops_per_token / 1e9:.3f} GOps/tok, "
          f"state update {t.state_update_ops_per_token / 1e9:.4f} GOps/tok ({su_share:.1%})")
print(spacer)

###############################################################################
# The parallel formulations trade extra arithmetic for parallelism.
for variant, form in ((VariantKind.MAMBA1, Formulation.PSCAN), (VariantKind.MAMBA2, Formulation.SSD),
                      (VariantKind.MAMBA3, Formulation.SSD)):
    g = build_layer_graph(CALIBRATED[variant], WorkloadSpec.prefill(form))
    su = [n for n in g if n.role is Role.STATE_UPDATE]
    print(f"{variant.label} {form.value}:")
    for n in su:
        print(f"    {n.name:<18} {n.ops_per_token:>14,.0f} ops/tok/layer")
