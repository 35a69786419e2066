import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from seqmag import analytic as an
from seqmag.entanglement import (Bipartition, default_splits, entanglement_trace, log_negativity,
                                 schmidt_coefficients)
from seqmag.protocol import ProtocolParams, free_evolution
from seqmag.states import DickeVector, dicke_to_full


def full_schmidt(state, split):
    psi = dicke_to_full(state).amplitudes.reshape(2**split.M1, 2**split.M2)
    return np.linalg.svd(psi, compute_uv=False)


def full_ln(state, split):
    return 2 * math.log2(full_schmidt(state, split).sum())


def test_bipartition():
    assert Bipartition.single(7) == Bipartition(1, 6)
    assert Bipartition.equal(7) == Bipartition(4, 3)
    assert Bipartition.parse("3|5").tag == "3|5"
    assert Bipartition(2, 3).M == 5
    for bad in ((0, 3), (3, 0)):
        with pytest.raises(ValueError):
            Bipartition(*bad)
    with pytest.raises(ValueError):
        Bipartition.parse("3-5")
    assert default_splits(2) == [Bipartition(1, 1)]
    assert default_splits(10) == [Bipartition(1, 9), Bipartition(5, 5)]


def test_bell_state():
    s = DickeVector.level(2, 1)
    assert np.allclose(schmidt_coefficients(s, Bipartition(1, 1)), [2**-0.5, 2**-0.5])
    assert log_negativity(s, Bipartition(1, 1)) == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("M", [2, 5, 9])
def test_product_levels(M):
    for k in (0, M):
        for M1 in range(1, M):
            split = Bipartition(M1, M - M1)
            a = schmidt_coefficients(DickeVector.level(M, k), split)
            assert a[0] == pytest.approx(1.0) and np.all(a[1:] < 1e-12)
            assert log_negativity(DickeVector.level(M, k), split) == 0.0
    coh = DickeVector.coherent(M, (0.6, 0.0, 0.8))
    assert log_negativity(coh, Bipartition.single(M)) < 1e-10


def test_random_state_vs_full_space():
    rng = np.random.default_rng(0)
    s = DickeVector.random(8, rng)
    split = Bipartition(4, 4)
    a = schmidt_coefficients(s, split)
    b = full_schmidt(s, split)
    assert np.max(np.abs(a - b[:a.size])) < 1e-9
    assert np.all(b[a.size:] < 1e-9)
    assert np.sum(a**2) == pytest.approx(1.0, abs=1e-10)
    assert np.all(np.diff(a) <= 0)


def test_dicke_two_of_four():
    s = DickeVector.level(4, 2)
    split = Bipartition(2, 2)
    assert log_negativity(s, split) == pytest.approx(full_ln(s, split), abs=1e-9)
    # Schmidt weights C(2,k)C(2,2-k)/C(4,2) = 1/6, 4/6, 1/6
    assert np.allclose(np.sort(schmidt_coefficients(s, split)), np.sqrt([1 / 6, 1 / 6, 4 / 6]))


@given(st.integers(2, 8), st.integers(0, 2**32 - 1), st.data())
def test_matches_full_space(M, seed, data):
    s = DickeVector.random(M, np.random.default_rng(seed))
    M1 = data.draw(st.integers(1, M - 1))
    split = Bipartition(M1, M - M1)
    assert log_negativity(s, split) == pytest.approx(full_ln(s, split), abs=1e-9)
    assert log_negativity(s, split) == pytest.approx(log_negativity(s, Bipartition(M - M1, M1)), abs=1e-12)
    assert log_negativity(s, split) >= 0


@given(st.integers(2, 30), st.integers(0, 2**32 - 1), st.floats(-10, 10))
def test_invariant_under_free_evolution(M, seed, phi):
    s = DickeVector.random(M, np.random.default_rng(seed))
    split = Bipartition.equal(M)
    rotated = DickeVector(M, free_evolution(M, phi) @ s.amplitudes)
    assert log_negativity(rotated, split) == pytest.approx(log_negativity(s, split), abs=1e-10)


def test_split_mismatch_rejected():
    with pytest.raises(ValueError):
        schmidt_coefficients(DickeVector.level(4, 1), Bipartition(2, 3))


def test_trace_starts_unentangled():
    p = ProtocolParams(M=6, beta=0.05, phi=0.7, N_max=256)
    tr = entanglement_trace(p, runs=4)
    assert tr.checkpoints[0] == 0
    assert np.all(tr.mean_LN[:, 0] < 1e-12)
    assert tr.mean_LN.shape == (2, tr.checkpoints.size)
    assert np.all(tr.mean_LN[:, -1] > 0.1)


def test_trace_zero_coupling():
    p = ProtocolParams(M=5, beta=0.0, phi=0.7, N_max=512)
    tr = entanglement_trace(p, runs=3)
    assert np.all(tr.mean_LN < 1e-10)


def test_trace_deterministic_and_threads():
    p = ProtocolParams(M=4, beta=0.1, phi=0.7, N_max=128)
    a = entanglement_trace(p, runs=5, base_seed=3, threads=1)
    b = entanglement_trace(p, runs=5, base_seed=3, threads=3)
    assert np.array_equal(a.mean_LN, b.mean_LN)


def test_trace_rejections():
    base = ProtocolParams(M=4, beta=0.1, phi=0.7, N_max=16)
    for p in (base.with_(gamma2=1e-3), base.with_(polarization=0.5), base.with_(M=1)):
        with pytest.raises(ValueError):
            entanglement_trace(p, runs=2)
    with pytest.raises(ValueError):
        entanglement_trace(base, splits=[(2, 3)], runs=2)
    with pytest.raises(ValueError):
        entanglement_trace(base, runs=1)


def test_half_rise_interpolation():
    from seqmag.entanglement import EntanglementTrace

    cps = np.array([0, 1, 2, 4, 8, 16])
    y = np.array([[0.0, 0.0, 0.1, 0.3, 0.7, 0.8]])
    tr = EntanglementTrace(cps, (Bipartition(1, 1),), y, np.zeros_like(y), 2)
    # half of 0.8 is reached a quarter of the way from 4 to 8 in log N
    assert tr.half_rise() == pytest.approx(4 * 2**0.25)
    assert tr.half_rise(plateau_N=8) == pytest.approx(4 * 2**0.125)


def test_entanglement_grows_on_backaction_scale():
    # buildup well before the late-time plateau; the precise timescale is checked in acceptance
    beta = an.beta_from_k0Ts(0.05)
    p = ProtocolParams(M=6, beta=beta, phi=0.7, N_max=2**12)
    tr = entanglement_trace(p, runs=16)
    n_half = tr.half_rise(1)
    assert 1 < n_half < 2**12
