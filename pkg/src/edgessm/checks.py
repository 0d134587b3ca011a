"""Equivalence and count-fidelity checks over seeded random toy instances."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from edgessm import oracle
from edgessm.archspec import Formulation, ModelConfig, VariantKind, with_layers
from edgessm.opgraph import OpConvention, WorkloadSpec, model_totals, ssd_chunk_len

PSCAN_TOL = 1e-12
SSD_TOL = 1e-10


@dataclass(frozen=True)
class CheckResult:
    check: str
    shape: str
    value: float
    limit: float
    passed: bool

    def describe(self) -> str:
        verdict = "ok" if self.passed else "FAIL"
        return f"{verdict:4} {self.check:<22} {self.shape:<34} {self.value:.3e} (limit {self.limit:.0e})"


def _diag_instance(rng: np.random.Generator, L: int) -> oracle.ScanInput:
    shape = (L,) + tuple(int(x) for x in rng.integers(1, 5, size=rng.integers(1, 3)))
    return oracle.ScanInput(rng.uniform(0.0, 1.0, shape), rng.standard_normal(shape),
                            rng.standard_normal(shape[1:]))


def _ssd_instance(rng: np.random.Generator, L: int) -> oracle.SSDInput:
    H, P, N = (int(x) for x in rng.integers(1, 4, size=3))
    R = int(rng.choice([1, 2, 4]))
    return oracle.SSDInput(rng.uniform(0.5, 1.0, (L, H)), rng.standard_normal((L, H, P, R)),
                           rng.standard_normal((L, H, N, R)), rng.standard_normal((L, H, N, R)),
                           rng.standard_normal((H, P, N)))


def equivalence_checks(n_instances: int = 1000, seed: int = 0, lengths: list[int] | None = None,
                       max_len: int = 256, fault: str | None = None) -> list[CheckResult]:
    """Compare pscan and chunked SSD with the sequential recurrence.

    Each instance draws a length L, then a diagonal scan (checked with
    pscan) and a scalar-decay recurrence (checked with SSD at chunk sizes
    1, 8 and L). ``fault`` ("pscan" or "ssd") perturbs that formulation's
    output so the harness itself can be tested.
    """
    rng = np.random.default_rng(seed)
    results = []
    for _ in range(n_instances):
        L = int(rng.choice(lengths)) if lengths else int(rng.integers(1, max_len + 1))
        inp = _diag_instance(rng, L)
        ref = oracle.sequential_scan(inp)
        got = oracle.blelloch_pscan(inp)
        if fault == "pscan":
            got = got + 1e-6 * np.abs(ref).max()
        dev = oracle.relative_deviation(got, ref)
        results.append(CheckResult("pscan==sequential", f"L={L} state={inp.b.shape[1:]}", dev,
                                   PSCAN_TOL, dev <= PSCAN_TOL))

        sinp = _ssd_instance(rng, L)
        ref = oracle.mimo_sequential(sinp)
        _, H, P, N, R = sinp.dims
        for Q in sorted({1, 8, L}):
            got = oracle.chunked_ssd(sinp, Q)
            if fault == "ssd":
                got = got + 1e-6 * np.abs(ref).max()
            dev = oracle.relative_deviation(got, ref)
            results.append(CheckResult(f"ssd(Q={Q})==sequential", f"L={L} H={H} P={P} N={N} R={R}",
                                       dev, SSD_TOL, dev <= SSD_TOL))
    return results


@dataclass(frozen=True)
class CountCase:
    config: ModelConfig
    formulation: Formulation
    seq_len: int
    chunk_size: int = 64


def toy_count_cases() -> list[CountCase]:
    """A fixed grid of toy configurations spanning all variants and formulations."""
    cases = []
    for d, n in ((4, 2), (8, 4), (6, 3), (16, 8)):
        cfg = ModelConfig.mamba1(d, 1, n)
        for L in (1, 5, 16):
            cases.append(CountCase(cfg, Formulation.SEQUENTIAL, L))
            cases.append(CountCase(cfg, Formulation.PSCAN, L))
    for variant, ranks in ((VariantKind.MAMBA2, (1,)), (VariantKind.MAMBA3, (2, 4))):
        for d, n, p in ((4, 4, 4), (8, 8, 8), (8, 2, 4)):
            for r in ranks:
                cfg = ModelConfig(variant, d, 1, n, n_heads=2 * d // p, head_dim=p, mimo_rank=r)
                for L in (1, 7, 16):
                    cases.append(CountCase(cfg, Formulation.SEQUENTIAL, L))
                    cases.append(CountCase(cfg, Formulation.SSD, L, chunk_size=8 * r))
    return cases


def instrumented_count(case: CountCase, rng: np.random.Generator) -> oracle.OpCounter:
    cfg, L = case.config, case.seq_len
    counter = oracle.OpCounter()
    if cfg.variant is VariantKind.MAMBA1:
        Di, N = cfg.d_inner, cfg.d_state
        oracle.mamba1_block(rng.uniform(0, 1, (L, Di)), -rng.uniform(0, 1, (Di, N)),
                            rng.standard_normal((L, N)), rng.standard_normal((L, N)),
                            rng.standard_normal((L, Di)), counter=counter,
                            formulation=case.formulation.value)
    else:
        H, P, N, R = cfg.n_heads, cfg.head_dim, cfg.d_state, cfg.mimo_rank
        oracle.mamba2_block(rng.uniform(0, 1, (L, H)), -rng.uniform(0, 1, H),
                            rng.standard_normal((L, H, P, R)), rng.standard_normal((L, H, N, R)),
                            rng.standard_normal((L, H, N, R)), counter=counter,
                            formulation=case.formulation.value,
                            chunk_size=ssd_chunk_len(case.chunk_size, R))
    return counter


def analytic_count(case: CountCase, convention: OpConvention) -> float:
    wl = WorkloadSpec.prefill(case.formulation, seq_len=case.seq_len, chunk_size=case.chunk_size)
    per_token = model_totals(with_layers(case.config, 1), wl, convention=convention)
    return per_token.state_update_ops_per_token * case.seq_len


def count_checks(seed: int = 0, transcendental_ops: float = 0.0,
                 cases: list[CountCase] | None = None) -> list[CheckResult]:
    """Analytic state-update op counts against instrumented oracle counts (exact)."""
    rng = np.random.default_rng(seed)
    convention = OpConvention(transcendental_ops=transcendental_ops)
    out = []
    for case in cases or toy_count_cases():
        measured = instrumented_count(case, rng).ops(transcendental_ops)
        predicted = analytic_count(case, convention)
        diff = abs(predicted - measured)
        cfg = case.config
        shape = (f"{cfg.variant.value} d={cfg.d_model} N={cfg.d_state} P={cfg.head_dim} "
                 f"R={cfg.mimo_rank} L={case.seq_len}")
        out.append(CheckResult(f"count[{case.formulation.value}]", shape, diff, 0.0,
                               diff <= 1e-9 * max(1.0, measured)))
    return out
