import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from edgessm import oracle
from edgessm.oracle import OpCounter, OracleInputError, ScanInput, SSDInput


def random_ssd(rng, L, H=2, P=3, N=4, R=1):
    return SSDInput(rng.uniform(0.5, 1.0, (L, H)), rng.standard_normal((L, H, P, R)),
                    rng.standard_normal((L, H, N, R)), rng.standard_normal((L, H, N, R)),
                    rng.standard_normal((H, P, N)))


def test_identity_dynamics_hold_the_initial_state():
    h0 = np.array([1.0, -2.0, 3.0])
    inp = ScanInput(np.ones((5, 3)), np.zeros((5, 3)), h0)
    for scan in (oracle.sequential_scan, oracle.blelloch_pscan):
        np.testing.assert_array_equal(scan(inp), np.tile(h0, (5, 1)))


def test_memoryless_dynamics_return_the_input():
    b = np.arange(12.0).reshape(4, 3)
    inp = ScanInput(np.zeros((4, 3)), b, np.full(3, 7.0))
    np.testing.assert_array_equal(oracle.sequential_scan(inp), b)
    np.testing.assert_array_equal(oracle.blelloch_pscan(inp), b)


def test_single_step_pscan_does_no_combines():
    assert oracle.combine_count(1) == 0
    counter = OpCounter()
    inp = ScanInput(np.array([[0.5, 0.25]]), np.array([[1.0, 2.0]]), np.array([2.0, 4.0]))
    out = oracle.blelloch_pscan(inp, counter)
    np.testing.assert_allclose(out, [[2.0, 3.0]])
    assert (counter.multiplies, counter.adds) == (2, 2)


@pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 13, 64, 100, 256])
def test_combine_count_is_work_efficient(n):
    assert oracle.combine_count(n) <= 2 * (n - 1)
    inp = ScanInput(np.full((n, 1), 0.9), np.ones((n, 1)))
    counter = OpCounter()
    oracle.blelloch_pscan(inp, counter)
    assert counter.multiplies == 1 + 2 * oracle.combine_count(n)


@settings(max_examples=60, deadline=None)
@given(L=st.integers(1, 256), seed=st.integers(0, 2**31 - 1))
def test_pscan_equals_sequential(L, seed):
    rng = np.random.default_rng(seed)
    inp = ScanInput(rng.uniform(0, 1, (L, 3)), rng.standard_normal((L, 3)), rng.standard_normal(3))
    ref = oracle.sequential_scan(inp)
    assert oracle.relative_deviation(oracle.blelloch_pscan(inp), ref) < 1e-12


@settings(max_examples=40, deadline=None)
@given(L=st.integers(1, 96), Q=st.integers(1, 40), R=st.sampled_from([1, 2, 4]),
       seed=st.integers(0, 2**31 - 1))
def test_chunked_ssd_equals_sequential(L, Q, R, seed):
    inp = random_ssd(np.random.default_rng(seed), L, R=R)
    ref = oracle.mimo_sequential(inp)
    assert oracle.relative_deviation(oracle.chunked_ssd(inp, Q), ref) < 1e-10


def test_ssd_single_chunk_and_unit_chunks():
    inp = random_ssd(np.random.default_rng(1), 33, R=2)
    ref = oracle.mimo_sequential(inp)
    for Q in (1, 33, 64):
        assert oracle.relative_deviation(oracle.chunked_ssd(inp, Q), ref) < 1e-10


def test_scan_is_linear_in_b_and_h0():
    rng = np.random.default_rng(3)
    a = rng.uniform(0, 1, (20, 4))
    b1, b2 = rng.standard_normal((2, 20, 4))
    h1, h2 = rng.standard_normal((2, 4))
    for scan in (oracle.sequential_scan, oracle.blelloch_pscan):
        whole = scan(ScanInput(a, 2 * b1 - b2, 2 * h1 - h2))
        parts = 2 * scan(ScanInput(a, b1, h1)) - scan(ScanInput(a, b2, h2))
        np.testing.assert_allclose(whole, parts, atol=1e-12)


def test_rank1_recurrence_is_the_scalar_decay_case():
    rng = np.random.default_rng(4)
    L, H, P, N = 9, 2, 3, 5
    a = rng.uniform(0.5, 1, (L, H))
    x = rng.standard_normal((L, H, P))
    B, C = rng.standard_normal((2, L, H, N))
    h = np.zeros((H, P, N))
    expected = []
    for t in range(L):
        h = a[t][:, None, None] * h + x[t][:, :, None] * B[t][:, None, :]
        expected.append(np.einsum("hpn,hn->hp", h, C[t]))
    got = oracle.mimo_sequential(SSDInput(a, x[..., None], B[..., None], C[..., None]))
    np.testing.assert_allclose(got[..., 0], np.array(expected), atol=1e-12)


def test_recurrence_count_scales_with_rank():
    rng = np.random.default_rng(5)
    counts = {}
    for R in (1, 4):
        c = OpCounter()
        oracle.mimo_sequential(random_ssd(rng, 10, R=R), c)
        counts[R] = c.arithmetic
    L, H, P, N = 10, 2, 3, 4
    assert counts[1] == L * H * P * N * 5
    assert counts[4] == L * H * P * N * (1 + 4 * 4)


def test_mamba1_block_formulations_agree():
    rng = np.random.default_rng(6)
    L, Di, N = 17, 6, 4
    args = (rng.uniform(0, 1, (L, Di)), -rng.uniform(0, 1, (Di, N)), rng.standard_normal((L, N)),
            rng.standard_normal((L, N)), rng.standard_normal((L, Di)))
    seq = oracle.mamba1_block(*args)
    par = oracle.mamba1_block(*args, formulation="pscan")
    assert oracle.relative_deviation(par, seq) < 1e-12


def test_bad_inputs_are_rejected():
    with pytest.raises(OracleInputError):
        ScanInput(np.ones((0, 2)), np.ones((0, 2)))
    with pytest.raises(OracleInputError):
        ScanInput(np.ones((3, 2)), np.ones((4, 2)))
    with pytest.raises(OracleInputError):
        ScanInput(np.ones((3, 2)), np.ones((3, 2)), np.ones(3))
    with pytest.raises(OracleInputError):
        SSDInput(np.ones((3, 2)), np.ones((3, 2, 1, 1)), np.ones((3, 2, 4, 1)), np.ones((3, 2, 5, 1)))
    with pytest.raises(OracleInputError):
        oracle.mamba1_block(np.ones((3, 2)), np.ones((2, 4)), np.ones((3, 4)), np.ones((3, 4)),
                            np.ones((3, 2)), formulation="ssd")
