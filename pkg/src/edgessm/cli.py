"""Command-line front end.

    edgessm analyze MODEL HW [--phase ...] [--formulation ...] [--layers N]
    edgessm compare [--config-dir DIR] [--hw HW]
    edgessm sweep size --from 15e6 --to 880e6 [--points 7] [--mode roofline]
    edgessm sweep batch --config MODEL [--batches 1,8,64,1024]
    edgessm oracle-check [--instances 1000] [--sizes L=1,8,64]

Exit codes: 0 success, 1 check failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import math
import sys
from pathlib import Path

import numpy as np

from edgessm.archspec import ConfigError, Formulation, MatchingError, VariantKind, load_config, with_layers
from edgessm.calibration import CALIBRATED
from edgessm.checks import count_checks, equivalence_checks
from edgessm.opgraph import Phase, WorkloadSpec
from edgessm.perf import HardwareConfig, load_hardware, sweep_batch, sweep_model_size
from edgessm.report import Report, line_plot_svg, render, series_csv

EXIT_OK, EXIT_CHECK, EXIT_USAGE = 0, 1, 2

COMPARE_ROWS = [
    (VariantKind.MAMBA1, Formulation.SEQUENTIAL), (VariantKind.MAMBA1, Formulation.PSCAN),
    (VariantKind.MAMBA2, Formulation.SEQUENTIAL), (VariantKind.MAMBA2, Formulation.SSD),
    (VariantKind.MAMBA3, Formulation.SEQUENTIAL), (VariantKind.MAMBA3, Formulation.SSD),
]


class UsageError(Exception):
    pass


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _hardware(path: str | None) -> HardwareConfig:
    return load_hardware(path) if path else HardwareConfig()


def _workload(args) -> WorkloadSpec:
    return WorkloadSpec(Phase(args.phase), args.batch, args.seq_len, Formulation(args.formulation),
                        args.chunk_size)


def cmd_analyze(args) -> int:
    config = load_config(args.model)
    if args.layers is not None:
        if args.layers < 0:
            raise UsageError("--layers must be >= 0")
        config = with_layers(config, args.layers)
    hw = load_hardware(args.hw)
    report = Report()
    report.add(config, _workload(args), hw)
    _emit(render(report, args.format), args.out)
    return EXIT_OK


def cmd_compare(args) -> int:
    hw = _hardware(args.hw)
    if args.config_dir:
        configs = {v: load_config(Path(args.config_dir) / f"{v.value}-880m") for v in VariantKind}
    else:
        configs = dict(CALIBRATED)
    report = Report()
    for variant, form in COMPARE_ROWS:
        report.add(configs[variant], WorkloadSpec.prefill(form, seq_len=args.seq_len,
                                                          chunk_size=args.chunk_size), hw)
    _emit(render(report, args.format, "Prefill, batch 1, roofline"), args.out)
    return EXIT_OK


def _parse_int_list(text: str) -> list[int]:
    try:
        return [int(float(x)) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"expected a comma-separated list of integers, got {text!r}") from None


def cmd_sweep(args) -> int:
    hw = _hardware(args.hw)
    fmt = "csv" if args.format == "md" else args.format
    if args.kind == "size":
        if args.points < 1:
            raise UsageError("--points must be >= 1")
        if args.lo > args.hi:
            print(f"warning: empty size range {args.lo:g}..{args.hi:g}", file=sys.stderr)
            sizes = []
        elif args.points == 1 or args.lo == args.hi:
            sizes = [args.lo]
        else:
            sizes = [float(x) for x in np.geomspace(args.lo, args.hi, args.points).round(-3)]
        norm = VariantKind(args.normalize_to)
        rows = sweep_model_size(sizes, hw=hw, mode=args.mode, normalize_to=norm)
        variants = list(VariantKind)
        series = {v.value: [r.normalized[v] for r in rows] for v in variants}
        xs = [r.target_params for r in rows]
        if fmt == "json":
            import json
            text = json.dumps({"mode": args.mode, "normalize_to": norm.value, "rows": [
                {"params": r.target_params, **{v.value: r.normalized[v] for v in variants},
                 "configs": {v.value: {"d_model": c.d_model, "n_layers": c.n_layers,
                                       "params": r.params[v]} for v, c in r.configs.items()}}
                for r in rows]}, indent=2)
        else:
            text = f"# mode={args.mode} normalize_to={norm.value}\n" + series_csv("params", xs, series)
        _emit(text, args.out)
        if args.svg:
            Path(args.svg).write_text(line_plot_svg(
                xs, {f"{v.label}": series[v.value] for v in variants}, log_x=True,
                title=f"Normalized latency vs size ({args.mode})", x_label="parameters",
                y_label=f"latency / {norm.label}"))
        return EXIT_OK

    config = load_config(args.config) if args.config else CALIBRATED[VariantKind.MAMBA3]
    batches = _parse_int_list(args.batches)
    if any(b < 1 for b in batches):
        raise UsageError("batch sizes must be >= 1")
    if not batches:
        print("warning: empty batch list", file=sys.stderr)
    results = sweep_batch(config, batches, hw, seq_len=args.seq_len)
    xs = [b for b, _ in results]
    series = {"throughput_tok_s": [e.throughput_tok_per_s for _, e in results],
              "model_oi": [e.model_oi for _, e in results]}
    if fmt == "json":
        import json
        text = json.dumps({"variant": config.variant.value, "rows": [
            {"batch": b, "throughput_tok_s": e.throughput_tok_per_s, "model_oi": e.model_oi,
             "bound": e.bound.value if e.bound else None} for b, e in results]}, indent=2)
    else:
        text = series_csv("batch", xs, series)
    _emit(text, args.out)
    if args.svg:
        Path(args.svg).write_text(line_plot_svg(
            xs, {"throughput": series["throughput_tok_s"]}, log_x=True,
            title=f"{config.variant.label} decode throughput", x_label="batch",
            y_label="tok/s per sequence"))
    return EXIT_OK


def _parse_sizes(text: str | None) -> list[int] | None:
    if not text:
        return None
    if not text.startswith("L="):
        raise UsageError(f"--sizes expects L=<n>[,<n>...], got {text!r}")
    sizes = _parse_int_list(text[2:])
    if not sizes or min(sizes) < 1:
        raise UsageError("--sizes needs positive lengths")
    return sizes


def cmd_oracle_check(args) -> int:
    lengths = _parse_sizes(args.sizes)
    results = equivalence_checks(args.instances, seed=args.seed, lengths=lengths,
                                 fault=args.inject_fault)
    results += count_checks(seed=args.seed)
    failures = [r for r in results if not r.passed]
    groups: dict[str, list] = {}
    for r in results:
        groups.setdefault(r.check.split("(")[0].split("[")[0], []).append(r)
    for name, rs in groups.items():
        worst = max(r.value for r in rs)
        bad = sum(not r.passed for r in rs)
        print(f"{'PASS' if not bad else 'FAIL'} {name}: {len(rs)} checks, worst deviation {worst:.3e}")
    for r in failures[:20]:
        print(r.describe())
    if failures:
        print(f"{len(failures)} of {len(results)} checks failed", file=sys.stderr)
        return EXIT_CHECK
    print(f"all {len(results)} checks passed")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="edgessm", description="Edge performance model of Mamba variants")
    p.add_argument("--seed", type=int, default=0, help="seed for all randomized checks (default 0)")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, formats=("md", "csv", "json")):
        sp.add_argument("--format", choices=formats, default="md")
        sp.add_argument("--out", help="write output to this file instead of stdout")

    a = sub.add_parser("analyze", help="evaluate one model on one hardware config")
    a.add_argument("model")
    a.add_argument("hw")
    a.add_argument("--phase", choices=[x.value for x in Phase], default="prefill")
    a.add_argument("--batch", type=int, default=1)
    a.add_argument("--seq-len", type=int, default=2048)
    a.add_argument("--formulation", choices=[x.value for x in Formulation], default="sequential")
    a.add_argument("--chunk-size", type=int, default=64)
    a.add_argument("--layers", type=int, help="override the number of layers")
    common(a)

    c = sub.add_parser("compare", help="all six variant/formulation rows")
    c.add_argument("--config-dir", help="directory holding mamba{1,2,3}-880m (default: built-in)")
    c.add_argument("--hw", help="hardware config file (default: built-in edge accelerator)")
    c.add_argument("--seq-len", type=int, default=2048)
    c.add_argument("--chunk-size", type=int, default=64)
    common(c)

    s = sub.add_parser("sweep", help="model-size or batch sweep")
    s.add_argument("kind", choices=["size", "batch"])
    s.add_argument("--from", dest="lo", type=float, default=15e6)
    s.add_argument("--to", dest="hi", type=float, default=880e6)
    s.add_argument("--points", type=int, default=7)
    s.add_argument("--mode", choices=["roofline", "stream-trend"], default="roofline")
    s.add_argument("--normalize-to", choices=["mamba1", "mamba2"], default="mamba2")
    s.add_argument("--config", help="model config for the batch sweep (default: calibrated Mamba-3)")
    s.add_argument("--batches", default="1,2,4,8,16,32,64,128,256,512,1024")
    s.add_argument("--seq-len", type=int, default=2048)
    s.add_argument("--hw")
    s.add_argument("--svg", help="also write a static SVG plot")
    common(s)

    o = sub.add_parser("oracle-check", help="numerical equivalence and op-count fidelity")
    o.add_argument("--instances", type=int, default=1000)
    o.add_argument("--sizes", help="restrict lengths, e.g. L=1 or L=1,8,64")
    o.add_argument("--inject-fault", choices=["pscan", "ssd"], help=argparse.SUPPRESS)
    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    handlers = {"analyze": cmd_analyze, "compare": cmd_compare, "sweep": cmd_sweep,
                "oracle-check": cmd_oracle_check}
    try:
        return handlers[args.command](args)
    except (ConfigError, UsageError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except MatchingError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except FileNotFoundError as exc:
        print(f"error: {exc.filename}: no such file", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
