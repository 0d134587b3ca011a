"""
Edge prefill versus hyperscale decode
=====================================

The state-update operators alone, normalized to Mamba-1. At batch 1 the
recurrence is compute-heavy and Mamba-3's extra arithmetic hurts. At
large decode batches the weights are amortized and the state traffic
dominates, so Mamba-3's higher arithmetic per byte pays off.
"""

from edgessm.archspec import VariantKind
from edgessm.calibration import CALIBRATED
from edgessm.perf import Scenario, regime_table, sweep_batch

for p in regime_table(CALIBRATED):
    print(f"{p.scenario.value:17} {p.variant.label:8} normalized {p.normalized:6.3f}  "
          f"OI {p.oi:8.2f} ops/B  {p.throughput:10.1f} tok/s")

###############################################################################
# Whole-model decode throughput per sequence as the batch grows.
for variant in VariantKind:
    print(variant.label)
    for batch, est in sweep_batch(CALIBRATED[variant], [1, 16, 256, 1024]):
        print(f"    B={batch:<5} {est.throughput_tok_per_s:9.1f} tok/s  OI {est.model_oi:7.2f}  "
              f"{est.bound.value}")

decode = {p.variant: p for p in regime_table(CALIBRATED) if p.scenario is Scenario.HYPERSCALE_DECODE}
print(f"decode OI ratio Mamba-3 / Mamba-2: "
      f"{decode[VariantKind.MAMBA3].oi / decode[VariantKind.MAMBA2].oi:.2f}")
