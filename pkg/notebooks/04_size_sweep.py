"""
Smaller models feel the MIMO penalty more
=========================================

Projection work grows with the square of the width while the state update
grows linearly, so the state update's share of the work, and with it the
Mamba-3 latency penalty, rises as models shrink.
"""

from pathlib import Path

from edgessm.archspec import VariantKind
from edgessm.perf import sweep_model_size
from edgessm.report import line_plot_svg

sizes = [15e6, 30e6, 60e6, 120e6, 240e6, 480e6, 880e6]

for mode in ("roofline", "stream-trend"):
    rows = sweep_model_size(sizes, mode=mode)
    print(f"mode = {mode}")
    for r in rows:
        m3 = r.configs[VariantKind.MAMBA3]
        print(f"    {r.target_params / 1e6:5.0f}M  Mamba-1 {r.normalized[VariantKind.MAMBA1]:.3f}  "
              f"Mamba-3 {r.normalized[VariantKind.MAMBA3]:.3f}  (Mamba-3 d={m3.d_model}, L={m3.n_layers})")

rows = sweep_model_size(sizes)
svg = line_plot_svg(sizes, {v.label: [r.normalized[v] for r in rows] for v in VariantKind},
                    log_x=True, title="Normalized latency vs size", x_label="parameters",
                    y_label="latency / Mamba-2")
out = Path("size_sweep.svg")
out.write_text(svg)
print(f"wrote {out}")
