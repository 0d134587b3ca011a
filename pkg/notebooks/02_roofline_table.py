"""
Roofline estimates for the six reference rows
=============================================

Prefill at batch 1 and 2048 tokens on the default edge accelerator
(1024 MAC units at 250 MHz, 34 GB/s DRAM, 2 MiB SRAM).
"""

from edgessm.archspec import Formulation, VariantKind
from edgessm.calibration import CALIBRATED, TABLE_TARGETS
from edgessm.opgraph import WorkloadSpec
from edgessm.perf import HardwareConfig
from edgessm.report import Report, to_markdown

hw = HardwareConfig()
print(f"MAC peak {hw.mac_peak / 1e9:g} GOps/s, ridge point {hw.ridge_point:.2f} ops/B")

report = Report()
for (variant, form) in TABLE_TARGETS:
    report.add(CALIBRATED[variant], WorkloadSpec.prefill(form), hw)
print(to_markdown(report, "Prefill, batch 1"))

###############################################################################
# How far each cell sits from its reference value.
for row, ((variant, form), target) in zip(report.rows, TABLE_TARGETS.items()):
    print(f"{variant.label:8} {form.value:10} "
          f"ops {row.total_gops / target.total_gops - 1:+6.1%}  "
          f"su {row.state_update_gops / target.state_update_gops - 1:+6.1%}  "
          f"oi {row.oi / target.oi - 1:+6.1%}  "
          f"tok/s {row.throughput_tok_s / target.throughput - 1:+6.1%}")

###############################################################################
# Sending the non-MatMul operators to the narrow SIMD array instead.
split = HardwareConfig(mapping="split")
report = Report()
for variant in VariantKind:
    report.add(CALIBRATED[variant], WorkloadSpec.prefill(Formulation.SEQUENTIAL), split)
print(to_markdown(report, "Split mapping"))
