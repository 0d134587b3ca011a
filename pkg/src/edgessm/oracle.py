"""Toy-scale reference implementations of the state-update formulations.

Every arithmetic operation is tallied in an :class:`OpCounter`. Reductions
are counted as multiply-accumulate into a zero accumulator, so a length-n
dot product costs n multiplies and n adds. The counts are what the
analytic inventory in :mod:`edgessm.opgraph` must reproduce.

Shapes
------
Diagonal (Mamba-1) scans work on ``a, b`` of shape ``(L, *S)``.
Scalar-decay (Mamba-2/3) inputs are per head:

    a  (L, H)          decay per step
    X  (L, H, P, R)    rank-R input
    B  (L, H, N, R)
    C  (L, H, N, R)
    h0 (H, P, N)

and the recurrence is ``h_t = a_t h_{t-1} + X_t B_t^T``, ``Y_t = h_t C_t``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class OracleInputError(ValueError):
    pass


@dataclass
class OpCounter:
    multiplies: int = 0
    adds: int = 0
    transcendentals: int = 0

    def mul(self, n: int) -> None:
        self.multiplies += int(n)

    def add(self, n: int) -> None:
        self.adds += int(n)

    def mac(self, n: int) -> None:
        self.multiplies += int(n)
        self.adds += int(n)

    def trans(self, n: int) -> None:
        self.transcendentals += int(n)

    @property
    def arithmetic(self) -> int:
        return self.multiplies + self.adds

    def ops(self, transcendental_ops: float = 0.0) -> float:
        return self.multiplies + self.adds + transcendental_ops * self.transcendentals


@dataclass
class ScanInput:
    """Diagonal linear recurrence ``h_t = a_t * h_{t-1} + b_t``."""

    a: np.ndarray
    b: np.ndarray
    h0: np.ndarray | None = None

    def __post_init__(self):
        self.a = np.asarray(self.a, dtype=np.float64)
        self.b = np.asarray(self.b, dtype=np.float64)
        if self.a.ndim < 1 or self.a.shape[0] < 1:
            raise OracleInputError("scan needs at least one step")
        if self.b.shape[0] != self.a.shape[0]:
            raise OracleInputError(
                f"a and b lengths differ: {self.a.shape[0]} vs {self.b.shape[0]}")
        try:
            np.broadcast_shapes(self.a.shape, self.b.shape)
        except ValueError:
            raise OracleInputError(f"a {self.a.shape} does not broadcast to b {self.b.shape}") from None
        if np.broadcast_shapes(self.a.shape, self.b.shape) != self.b.shape:
            raise OracleInputError(f"a {self.a.shape} does not broadcast to b {self.b.shape}")
        self.a = np.broadcast_to(self.a, self.b.shape).copy()
        if self.h0 is None:
            self.h0 = np.zeros(self.b.shape[1:])
        else:
            self.h0 = np.asarray(self.h0, dtype=np.float64)
            if self.h0.shape != self.b.shape[1:]:
                raise OracleInputError(f"h0 shape {self.h0.shape} != state shape {self.b.shape[1:]}")

    @property
    def length(self) -> int:
        return self.b.shape[0]

    @property
    def state_elems(self) -> int:
        return int(np.prod(self.b.shape[1:], dtype=np.int64))


@dataclass
class SSDInput:
    a: np.ndarray
    X: np.ndarray
    B: np.ndarray
    C: np.ndarray
    h0: np.ndarray | None = None

    def __post_init__(self):
        self.a, self.X, self.B, self.C = (np.asarray(v, dtype=np.float64)
                                          for v in (self.a, self.X, self.B, self.C))
        if self.X.ndim != 4 or self.B.ndim != 4 or self.C.ndim != 4 or self.a.ndim != 2:
            raise OracleInputError("expected a (L,H), X (L,H,P,R), B and C (L,H,N,R)")
        L, H, P, R = self.X.shape
        if L < 1:
            raise OracleInputError("scan needs at least one step")
        if self.a.shape != (L, H):
            raise OracleInputError(f"a shape {self.a.shape} != {(L, H)}")
        if self.B.shape != self.C.shape:
            raise OracleInputError(f"B {self.B.shape} and C {self.C.shape} differ")
        if self.B.shape[:2] != (L, H) or self.B.shape[3] != R:
            raise OracleInputError(f"B shape {self.B.shape} inconsistent with X {self.X.shape}")
        N = self.B.shape[2]
        if self.h0 is None:
            self.h0 = np.zeros((H, P, N))
        else:
            self.h0 = np.asarray(self.h0, dtype=np.float64)
            if self.h0.shape != (H, P, N):
                raise OracleInputError(f"h0 shape {self.h0.shape} != {(H, P, N)}")

    @property
    def dims(self) -> tuple[int, int, int, int, int]:
        L, H, P, R = self.X.shape
        return L, H, P, self.B.shape[2], R


# -- diagonal scans ---------------------------------------------------------------------------

def sequential_scan(inp: ScanInput, counter: OpCounter | None = None) -> np.ndarray:
    """States ``h[1..L]`` of the diagonal recurrence, one step at a time."""
    counter = counter if counter is not None else OpCounter()
    S = inp.state_elems
    h = inp.h0.copy()
    out = np.empty_like(inp.b)
    for t in range(inp.length):
        h = inp.a[t] * h + inp.b[t]
        counter.mul(S)
        counter.add(S)
        out[t] = h
    return out


def brent_kung_levels(n: int) -> tuple[list[int], list[int]]:
    """Strides of the up-sweep and down-sweep for an inclusive scan of n items."""
    up = []
    s = 1
    while s < n:
        up.append(s)
        s *= 2
    down = [s for s in reversed(up[:-1])] if up else []
    return up, down


def blelloch_pscan(inp: ScanInput, counter: OpCounter | None = None) -> np.ndarray:
    """Work-efficient (up-sweep / down-sweep) parallel scan over ``(a, b)`` pairs.

    The initial state is folded into the first element (``b_1 += a_1 h0``),
    so a one-element scan does exactly the work of one sequential step.
    Combine: ``(a1, b1) . (a2, b2) = (a1 a2, a2 b1 + b2)``.
    """
    counter = counter if counter is not None else OpCounter()
    S = inp.state_elems
    n = inp.length
    A = inp.a.copy()
    Bv = inp.b.copy()
    Bv[0] = A[0] * inp.h0 + Bv[0]
    counter.mul(S)
    counter.add(S)

    def combine(left: np.ndarray, right: np.ndarray) -> None:
        Bv[right] = A[right] * Bv[left] + Bv[right]
        A[right] = A[left] * A[right]
        k = len(right)
        counter.mul(2 * k * S)
        counter.add(k * S)

    up, down = brent_kung_levels(n)
    for s in up:
        right = np.arange(2 * s - 1, n, 2 * s)
        if len(right):
            combine(right - s, right)
    for s in down:
        right = np.arange(3 * s - 1, n, 2 * s)
        if len(right):
            combine(right - s, right)
    return Bv


def combine_count(n: int) -> int:
    """Number of pair combines :func:`blelloch_pscan` performs for ``n`` items."""
    up, down = brent_kung_levels(n)
    return sum(len(range(2 * s - 1, n, 2 * s)) for s in up) + \
        sum(len(range(3 * s - 1, n, 2 * s)) for s in down)


# -- scalar-decay, rank-R recurrence ----------------------------------------------------------

def mimo_sequential(inp: SSDInput, counter: OpCounter | None = None) -> np.ndarray:
    """Outputs ``Y (L, H, P, R)`` of the scalar-decay recurrence, step by step."""
    counter = counter if counter is not None else OpCounter()
    L, H, P, N, R = inp.dims
    h = inp.h0.copy()
    Y = np.empty((L, H, P, R))
    for t in range(L):
        h = inp.a[t][:, None, None] * h
        counter.mul(H * P * N)
        h = h + inp.X[t] @ inp.B[t].transpose(0, 2, 1)
        counter.mac(H * P * N * R)
        Y[t] = h @ inp.C[t]
        counter.mac(H * P * R * N)
    return Y


def _pad(inp: SSDInput, Q: int) -> tuple[SSDInput, int]:
    L = inp.X.shape[0]
    Lp = -(-L // Q) * Q
    if Lp == L:
        return inp, L
    extra = Lp - L

    def z(v):
        return np.concatenate([v, np.zeros((extra,) + v.shape[1:])])

    a = np.concatenate([inp.a, np.ones((extra, inp.a.shape[1]))])
    return SSDInput(a, z(inp.X), z(inp.B), z(inp.C), inp.h0), L


def chunked_ssd(inp: SSDInput, Q: int, R: int | None = None,
                counter: OpCounter | None = None) -> np.ndarray:
    """Chunked (state-space-duality) evaluation of :func:`mimo_sequential`.

    Within a chunk the outputs come from a masked score block ``C B^T``
    times ``X``; chunks are linked by a recurrence on their boundary
    states. Lengths not divisible by ``Q`` are zero-padded (``a = 1``,
    ``X = B = C = 0``) and the padded outputs dropped.
    """
    counter = counter if counter is not None else OpCounter()
    if Q < 1:
        raise OracleInputError("chunk size must be >= 1")
    if R is not None and R != inp.X.shape[3]:
        raise OracleInputError(f"rank {R} does not match input rank {inp.X.shape[3]}")
    padded, L = _pad(inp, Q)
    Lp, H, P, N, R = padded.dims
    nC = Lp // Q
    a = padded.a.reshape(nC, Q, H)
    X = padded.X.reshape(nC, Q, H, P, R)
    Bc = padded.B.reshape(nC, Q, H, N, R)
    Cc = padded.C.reshape(nC, Q, H, N, R)

    # seg[c, h, t, s] = prod_{k=s+1..t} a_k within chunk c, for s <= t
    seg = np.zeros((nC, H, Q, Q))
    seg[:, :, 0, 0] = 1.0
    for t in range(1, Q):
        seg[:, :, t, :t] = a[:, t, :, None] * seg[:, :, t - 1, :t]
        seg[:, :, t, t] = 1.0
        counter.mul(nC * H * t)
    from_start = seg[:, :, :, 0] * a[:, 0, :, None]       # prod_{k=0..t} a_k
    counter.mul(nC * H * Q)
    to_end = seg[:, :, Q - 1, :]                         # prod_{k=s+1..Q-1} a_k
    chunk_decay = from_start[:, :, Q - 1]

    # intra-chunk: masked score block times inputs (full Q x Q block)
    # rows and columns of the block are (token, rank) pairs
    C_rows = Cc.transpose(0, 2, 1, 4, 3).reshape(nC, H, Q * R, N)
    B_cols = Bc.transpose(0, 2, 3, 1, 4).reshape(nC, H, N, Q * R)
    G = C_rows @ B_cols
    counter.mac(nC * H * Q * R * Q * R * N)
    mask = np.broadcast_to((seg * np.tril(np.ones((Q, Q))))[:, :, :, None, :, None],
                           (nC, H, Q, R, Q, R)).reshape(nC, H, Q * R, Q * R)
    M = G * mask
    counter.mul(nC * H * Q * R * Q * R)
    X_rows = X.transpose(0, 2, 1, 4, 3).reshape(nC, H, Q * R, P)
    y_diag = (M @ X_rows).reshape(nC, H, Q, R, P).transpose(0, 2, 1, 4, 3)
    counter.mac(nC * H * Q * P * R * Q * R)

    # per-chunk state contributed by the chunk's own inputs
    Xs = X * to_end.transpose(0, 2, 1)[:, :, :, None, None]
    counter.mul(nC * H * Q * P * R)
    S_chunk = Xs.transpose(0, 2, 3, 1, 4).reshape(nC, H, P, Q * R) @ B_cols.transpose(0, 1, 3, 2)
    counter.mac(nC * H * P * N * Q * R)

    # inter-chunk recurrence on boundary states
    entering = np.empty((nC, H, P, N))
    h = padded.h0.copy()
    for c in range(nC):
        entering[c] = h
        h = chunk_decay[c][:, None, None] * h + S_chunk[c]
        counter.mul(H * P * N)
        counter.add(H * P * N)

    # contribution of the entering state to each output
    y_off = (entering @ C_rows.transpose(0, 1, 3, 2)).reshape(nC, H, P, Q, R).transpose(0, 3, 1, 2, 4)
    counter.mac(nC * H * Q * P * R * N)
    y_off = y_off * from_start.transpose(0, 2, 1)[:, :, :, None, None]
    counter.mul(nC * H * Q * P * R)
    Y = (y_diag + y_off).reshape(Lp, H, P, R)
    counter.add(nC * H * Q * P * R)
    return Y[:L]


# -- full state-update blocks (discretization + recurrence + readout) ------------------------

def mamba1_block(delta, A, B, C, u, h0=None, counter: OpCounter | None = None,
                 formulation: str = "sequential") -> np.ndarray:
    """Mamba-1 selective scan for one layer.

    delta, u: (L, Di); A: (Di, N); B, C: (L, N). Returns y (L, Di).
    """
    counter = counter if counter is not None else OpCounter()
    delta, A, B, C, u = (np.asarray(v, dtype=np.float64) for v in (delta, A, B, C, u))
    L, Di = delta.shape
    N = A.shape[1]
    if A.shape != (Di, N) or B.shape != (L, N) or C.shape != (L, N) or u.shape != (L, Di):
        raise OracleInputError("inconsistent mamba1 block shapes")
    dA = delta[:, :, None] * A[None]
    counter.mul(L * Di * N)
    Abar = np.exp(dA)
    counter.trans(L * Di * N)
    dB = delta[:, :, None] * B[:, None, :]
    counter.mul(L * Di * N)
    Bx = dB * u[:, :, None]
    counter.mul(L * Di * N)
    inp = ScanInput(Abar, Bx, h0)
    if formulation == "sequential":
        hs = sequential_scan(inp, counter)
    elif formulation == "pscan":
        hs = blelloch_pscan(inp, counter)
    else:
        raise OracleInputError(f"unknown formulation {formulation!r}")
    y = np.einsum("tdn,tn->td", hs, C)
    counter.mac(L * Di * N)
    return y


def mamba2_block(dt, A, X, B, C, h0=None, counter: OpCounter | None = None,
                 formulation: str = "sequential", chunk_size: int = 64) -> np.ndarray:
    """Scalar-decay (Mamba-2, or Mamba-3 for R > 1) state update for one layer.

    dt: (L, H); A: (H,); X: (L, H, P, R); B, C: (L, H, N, R).
    """
    counter = counter if counter is not None else OpCounter()
    dt, A, X = (np.asarray(v, dtype=np.float64) for v in (dt, A, X))
    L, H = dt.shape
    if A.shape != (H,) or X.shape[:2] != (L, H):
        raise OracleInputError("inconsistent mamba2 block shapes")
    a = np.exp(dt * A[None])
    counter.mul(L * H)
    counter.trans(L * H)
    Xs = X * dt[:, :, None, None]
    counter.mul(X.size)
    inp = SSDInput(a, Xs, B, C, h0)
    if formulation == "sequential":
        return mimo_sequential(inp, counter)
    if formulation == "ssd":
        return chunked_ssd(inp, chunk_size, counter=counter)
    raise OracleInputError(f"unknown formulation {formulation!r}")


def relative_deviation(x: np.ndarray, ref: np.ndarray) -> float:
    """max |x - ref| / max |ref| (0 when both vanish)."""
    scale = float(np.max(np.abs(ref))) if ref.size else 0.0
    err = float(np.max(np.abs(x - ref))) if ref.size else 0.0
    if scale == 0.0:
        return err
    return err / scale
