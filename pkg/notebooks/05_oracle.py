"""
Three ways to run the same recurrence
=====================================

The sequential scan, the work-efficient parallel scan and the chunked
matrix formulation give the same states up to rounding, at different
arithmetic cost.
"""

import numpy as np

from edgessm import oracle

rng = np.random.default_rng(0)

L, S = 64, 8
inp = oracle.ScanInput(rng.uniform(0, 1, (L, S)), rng.standard_normal((L, S)), rng.standard_normal(S))
seq_count, par_count = oracle.OpCounter(), oracle.OpCounter()
ref = oracle.sequential_scan(inp, seq_count)
par = oracle.blelloch_pscan(inp, par_count)
print(f"pscan deviation {oracle.relative_deviation(par, ref):.2e}")
print(f"ops: sequential {seq_count.arithmetic}, pscan {par_count.arithmetic} "
      f"({oracle.combine_count(L)} combines)")

###############################################################################
# Rank-4 scalar-decay recurrence against its chunked form.
H, P, N, R = 2, 4, 8, 4
sinp = oracle.SSDInput(rng.uniform(0.5, 1, (L, H)), rng.standard_normal((L, H, P, R)),
                       rng.standard_normal((L, H, N, R)), rng.standard_normal((L, H, N, R)))
ref_count = oracle.OpCounter()
ref = oracle.mimo_sequential(sinp, ref_count)
for Q in (1, 8, 16, 64):
    c = oracle.OpCounter()
    y = oracle.chunked_ssd(sinp, Q, counter=c)
    print(f"Q={Q:<3} deviation {oracle.relative_deviation(y, ref):.2e}  "
          f"ops {c.arithmetic:>9} vs sequential {ref_count.arithmetic}")
