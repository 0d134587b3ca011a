"""Tabular reports (markdown / CSV / JSON) and deterministic SVG plots.

CSV and JSON rows use these keys, in this order:

    variant, formulation, phase, batch, seq_len, total_gops, state_update_gops,
    oi, throughput_tok_s, energy_mj_tok, bound

``throughput_tok_s`` and ``bound`` are empty (CSV) / null (JSON) for an
empty workload. A JSON report is ``{"metadata": {...}, "rows": [...]}``;
the metadata embeds every configuration used, so :func:`verify_report`
can recompute each row from the file alone.
"""

from __future__ import annotations

import csv
import hashlib
import io
import json
from dataclasses import asdict, dataclass, field
from importlib import metadata as importlib_metadata

from edgessm.archspec import Formulation, ModelConfig, VariantKind, config_from_dict, dump_config, parse_kv
from edgessm.opgraph import Phase, WorkloadSpec
from edgessm.perf import HardwareConfig, PerfEstimate, dump_hardware, evaluate, hardware_from_dict

COLUMNS = ["variant", "formulation", "phase", "batch", "seq_len", "total_gops", "state_update_gops",
           "oi", "throughput_tok_s", "energy_mj_tok", "bound"]


def tool_version() -> str:
    try:
        return importlib_metadata.version("artifact")
    except importlib_metadata.PackageNotFoundError:
        return "unknown"


def config_hash(text: str) -> str:
    return hashlib.sha256(text.encode()).hexdigest()[:12]


@dataclass
class ReportRow:
    variant: str
    formulation: str
    phase: str
    batch: int
    seq_len: int
    total_gops: float
    state_update_gops: float
    oi: float
    throughput_tok_s: float | None
    energy_mj_tok: float
    bound: str | None
    config_key: str = ""

    def as_dict(self) -> dict:
        return {k: getattr(self, k) for k in COLUMNS}


@dataclass
class Report:
    rows: list[ReportRow] = field(default_factory=list)
    configs: dict[str, str] = field(default_factory=dict)       # key -> config file text
    hardware: str = ""
    notes: list[str] = field(default_factory=list)

    def add(self, config: ModelConfig, workload: WorkloadSpec, hw: HardwareConfig,
            est: PerfEstimate | None = None) -> ReportRow:
        text = dump_config(config)
        key = config_hash(text)
        self.configs[key] = text
        self.hardware = dump_hardware(hw)
        est = est or evaluate(config, workload, hw)
        row = ReportRow(
            variant=config.variant.value, formulation=workload.formulation.value,
            phase=workload.phase.value, batch=workload.batch, seq_len=workload.seq_len,
            total_gops=est.ops_per_token, state_update_gops=est.state_update_ops,
            oi=est.oi_ops_per_byte, throughput_tok_s=est.throughput_tok_per_s,
            energy_mj_tok=est.energy_mj_per_token, bound=est.bound.value if est.bound else None,
            config_key=key)
        self.rows.append(row)
        return row

    def find(self, variant: VariantKind, formulation: Formulation) -> ReportRow | None:
        for r in self.rows:
            if r.variant == variant.value and r.formulation == formulation.value:
                return r
        return None

    def metadata(self) -> dict:
        return {"tool": "edgessm", "version": tool_version(),
                "config_hashes": {r.variant + "/" + r.formulation: r.config_key for r in self.rows},
                "configs": self.configs, "hardware": self.hardware, "notes": self.notes}


# -- derived deltas -----------------------------------------------------------------------------

def mamba3_vs_mamba2(report: Report) -> dict[str, float] | None:
    """Relative changes of the sequential Mamba-3 row against Mamba-2, recomputed from the rows."""
    m2 = report.find(VariantKind.MAMBA2, Formulation.SEQUENTIAL)
    m3 = report.find(VariantKind.MAMBA3, Formulation.SEQUENTIAL)
    if m2 is None or m3 is None or not m2.total_gops or not m2.state_update_gops:
        return None
    out = {"total_ops": m3.total_gops / m2.total_gops - 1,
           "state_update_ratio": m3.state_update_gops / m2.state_update_gops,
           "energy": m3.energy_mj_tok / m2.energy_mj_tok - 1}
    if m2.throughput_tok_s and m3.throughput_tok_s:
        out["throughput"] = m3.throughput_tok_s / m2.throughput_tok_s - 1
        out["latency"] = m2.throughput_tok_s / m3.throughput_tok_s - 1
    return out


# -- rendering --------------------------------------------------------------------------------------

_LABEL = {"mamba1": "Mamba-1", "mamba2": "Mamba-2", "mamba3": "Mamba-3"}


def _fmt(v, digits):
    return "empty workload" if v is None else f"{v:.{digits}f}"


def to_markdown(report: Report, title: str | None = None) -> str:
    out = [f"## {title}", ""] if title else []
    out.append("| Model | Formulation | Total ops [GOps/tok] | State-update ops [GOps/tok] | OI [ops/B] "
               "| Throughput [tok/s] | Energy [mJ/tok] | Bound |")
    out.append("|---|---|---:|---:|---:|---:|---:|---|")
    for r in report.rows:
        out.append(f"| {_LABEL[r.variant]} | {r.formulation} | {r.total_gops:.3f} | "
                   f"{r.state_update_gops:.4f} | {r.oi:.1f} | {_fmt(r.throughput_tok_s, 1)} | "
                   f"{r.energy_mj_tok:.3f} | {r.bound or '-'} |")
    deltas = mamba3_vs_mamba2(report)
    if deltas:
        out.append("")
        out.append(f"Mamba-3 vs Mamba-2 (sequential): total ops {deltas['total_ops']:+.1%}, "
                   f"state-update ops x{deltas['state_update_ratio']:.2f}, "
                   + (f"throughput {deltas['throughput']:+.1%}, " if "throughput" in deltas else "")
                   + f"energy {deltas['energy']:+.1%}")
    for note in report.notes:
        out.append("")
        out.append(note)
    return "\n".join(out) + "\n"


def to_csv(report: Report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    w.writerow(COLUMNS)
    for r in report.rows:
        w.writerow(["" if r.as_dict()[c] is None else r.as_dict()[c] for c in COLUMNS])
    return buf.getvalue()


def to_json(report: Report) -> str:
    return json.dumps({"metadata": report.metadata(), "rows": [r.as_dict() for r in report.rows]},
                      indent=2, sort_keys=False)


def render(report: Report, fmt: str, title: str | None = None) -> str:
    if fmt == "md":
        return to_markdown(report, title)
    if fmt == "csv":
        return to_csv(report)
    if fmt == "json":
        return to_json(report)
    raise ValueError(f"unknown format {fmt!r}")


def verify_report(text: str) -> list[str]:
    """Recompute every row of a JSON report; return a list of mismatches (empty if identical)."""
    doc = json.loads(text)
    meta = doc["metadata"]
    hw = hardware_from_dict(parse_kv(meta["hardware"]))
    problems = []
    for row, key in zip(doc["rows"], meta["config_hashes"].values()):
        cfg = config_from_dict(parse_kv(meta["configs"][key]))
        wl = WorkloadSpec(Phase(row["phase"]), row["batch"], row["seq_len"],
                          Formulation(row["formulation"]))
        fresh = Report()
        fresh.add(cfg, wl, hw)
        again = json.loads(json.dumps(fresh.rows[0].as_dict()))
        if again != row:
            problems.append(f"{row['variant']}/{row['formulation']}: {row} != {again}")
    return problems


# -- figure data -------------------------------------------------------------------------------------

def series_csv(x_name: str, xs: list, series: dict[str, list]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\r\n")
    names = list(series)
    w.writerow([x_name] + names)
    for i, x in enumerate(xs):
        w.writerow([x] + [series[n][i] for n in names])
    return buf.getvalue()


_COLORS = ["#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd"]


def line_plot_svg(xs: list[float], series: dict[str, list[float]], *, title: str, x_label: str,
                  y_label: str, log_x: bool = False, width: int = 560, height: int = 360) -> str:
    """A fixed-layout line chart; identical inputs give byte-identical output."""
    import math
    left, right, top, bottom = 70, 130, 40, 50
    pw, ph = width - left - right, height - top - bottom
    tx = (lambda v: math.log10(v)) if log_x else (lambda v: v)
    if not xs:
        xs_t, x0, x1 = [], 0.0, 1.0
    else:
        xs_t = [tx(x) for x in xs]
        x0, x1 = min(xs_t), max(xs_t)
    ys = [y for s in series.values() for y in s]
    y0, y1 = (min(ys), max(ys)) if ys else (0.0, 1.0)
    if x1 == x0:
        x0, x1 = x0 - 1, x1 + 1
    if y1 == y0:
        y0, y1 = y0 - 0.5, y1 + 0.5
    pad = 0.05 * (y1 - y0)
    y0, y1 = y0 - pad, y1 + pad

    def px(v):
        return left + (v - x0) / (x1 - x0) * pw

    def py(v):
        return top + (1 - (v - y0) / (y1 - y0)) * ph

    parts = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
             f'viewBox="0 0 {width} {height}" font-family="sans-serif" font-size="11">',
             f'<rect x="0" y="0" width="{width}" height="{height}" fill="white"/>',
             f'<text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="13">{title}</text>',
             f'<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>']
    for i in range(5):
        yv = y0 + (y1 - y0) * i / 4
        parts.append(f'<text x="{left - 6}" y="{py(yv) + 4:.1f}" text-anchor="end">{yv:.3g}</text>')
        parts.append(f'<line x1="{left}" y1="{py(yv):.1f}" x2="{left + pw}" y2="{py(yv):.1f}" '
                     f'stroke="#ddd"/>')
    for x, xt in zip(xs, xs_t):
        parts.append(f'<text x="{px(xt):.1f}" y="{top + ph + 16}" text-anchor="middle">{x:.3g}</text>')
    parts.append(f'<text x="{left + pw / 2:.1f}" y="{height - 10}" text-anchor="middle">{x_label}</text>')
    parts.append(f'<text x="16" y="{top + ph / 2:.1f}" text-anchor="middle" '
                 f'transform="rotate(-90 16 {top + ph / 2:.1f})">{y_label}</text>')
    for k, (name, ys_) in enumerate(series.items()):
        color = _COLORS[k % len(_COLORS)]
        pts = " ".join(f"{px(xt):.1f},{py(y):.1f}" for xt, y in zip(xs_t, ys_))
        if pts:
            parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="2"/>')
        ly = top + 14 + 16 * k
        parts.append(f'<line x1="{left + pw + 10}" y1="{ly - 4}" x2="{left + pw + 30}" y2="{ly - 4}" '
                     f'stroke="{color}" stroke-width="2"/>')
        parts.append(f'<text x="{left + pw + 34}" y="{ly}">{name}</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
