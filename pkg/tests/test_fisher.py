import numpy as np
import pytest

from seqmag import analytic as an
from seqmag.fisher import (FisherEstimate, d_phi_convergence, estimate_fisher, estimate_fisher_all,
                           fit_power_law, fit_scaling_exponent)
from seqmag.oracles import exhaustive_fisher
from seqmag.protocol import ProtocolParams, checkpoints_pow2


def _synthetic(values, cps):
    return FisherEstimate(np.asarray(cps), np.asarray(values, float), np.zeros(len(cps)), 2, 1e-6)


def test_estimate_validation():
    with pytest.raises(ValueError):
        FisherEstimate(np.array([1]), np.array([1.0]), np.array([0.1]), 1, 1e-6)
    with pytest.raises(ValueError):
        FisherEstimate(np.array([1]), np.array([-1.0]), np.array([0.1]), 5, 1e-6)
    with pytest.raises(ValueError):
        FisherEstimate.from_runs([1, 2], [[1.0, 2.0]], 1e-6)
    p = ProtocolParams(M=2, beta=0.1, phi=0.7, N_max=8)
    with pytest.raises(ValueError):
        estimate_fisher(p, runs=1)
    with pytest.raises(ValueError):
        estimate_fisher(p, runs=4, estimator="ratio")


def test_zero_coupling_gives_zero():
    p = ProtocolParams(M=3, beta=0.0, phi=0.7, N_max=256)
    for est in estimate_fisher_all(p, runs=8).values():
        assert np.all(est.mean_FI == 0)
        assert est.at(256) == (0.0, 0.0)
    with pytest.raises(KeyError):
        est.at(3)


def test_matches_exhaustive_enumeration():
    M, N, beta, phi = 2, 10, 0.3, 0.7
    exact, total = exhaustive_fisher(M, beta, phi, N, return_total=True)
    assert total == pytest.approx(1.0, abs=1e-12)
    p = ProtocolParams(M=M, beta=beta, phi=phi, N_max=N)
    res = estimate_fisher_all(p, runs=10_000, checkpoints=[N])
    for est in res.values():
        m, se = est.at(N)
        assert abs(m - exact) < 3 * se, (est.estimator, m, exact, se)


def test_tau_scaling():
    p = ProtocolParams(M=2, beta=0.3, phi=0.7, N_max=6)
    a = estimate_fisher(p, runs=4, checkpoints=[6])
    b = estimate_fisher(p.with_(tau_m=3.0), runs=4, checkpoints=[6])
    assert b.mean_FI[0] == pytest.approx(9 * a.mean_FI[0], rel=1e-12)
    assert exhaustive_fisher(2, 0.3, 0.7, 6, tau_m=3.0) == pytest.approx(9 * exhaustive_fisher(2, 0.3, 0.7, 6))


@pytest.fixture(scope="module")
def m5():
    k0Ts = 0.01
    p = ProtocolParams(M=5, beta=an.beta_from_k0Ts(k0Ts), phi=0.7, N_max=2048)
    res = estimate_fisher_all(p, runs=400)
    cps = res["score"].checkpoints
    ref = an.fisher_sum_exact(cps, 5, k0Ts, 1.0, an.total_decay(p.beta), 0.7)
    return p, res, ref


def test_weak_coupling_sum_small_N(m5):
    _, res, ref = m5
    score, cond = res["score"], res["conditional"]
    sel = score.checkpoints <= 512
    assert np.all(np.abs(score.mean_FI[sel] - ref[sel]) < 3 * score.std_error[sel])
    small = cond.checkpoints <= 64
    assert np.all(np.abs(cond.mean_FI[small] / ref[small] - 1) < 0.01)


def test_record_information_below_spin_bound(m5):
    # the spins carry at most M (N tau)^2 about the detuning
    p, res, ref = m5
    N = res["conditional"].checkpoints
    assert np.all(res["conditional"].mean_FI <= p.M * N.astype(float) ** 2)
    # the weak-coupling sum ignores this ceiling and overshoots well before 1/gamma_b
    m, se = res["score"].at(2048)
    assert m / ref[-1] < 0.85 and (ref[-1] - m) > 3 * se
    for N_small, beta in [(8, 0.3), (12, 0.2)]:
        assert exhaustive_fisher(2, beta, 0.7, N_small) <= 2 * N_small**2


def test_seed_permutation_invariance():
    rng = np.random.default_rng(0)
    vals = rng.lognormal(size=(50, 6)) * 1e7
    a = FisherEstimate.from_runs(range(6), vals, 1e-6)
    b = FisherEstimate.from_runs(range(6), vals[rng.permutation(50)], 1e-6)
    assert np.allclose(a.mean_FI, b.mean_FI, rtol=1e-9, atol=0)
    assert np.allclose(a.std_error, b.std_error, rtol=1e-9, atol=0)


def test_thread_count_independent():
    p = ProtocolParams(M=4, beta=0.02, phi=0.7, N_max=512)
    a = estimate_fisher_all(p, runs=12, base_seed=5, threads=1)
    b = estimate_fisher_all(p, runs=12, base_seed=5, threads=4)
    for k in a:
        assert np.array_equal(a[k].mean_FI, b[k].mean_FI)
        assert np.array_equal(a[k].per_run, b[k].per_run)


def test_base_seed_offsets_runs():
    p = ProtocolParams(M=2, beta=0.05, phi=0.7, N_max=128)
    a = estimate_fisher(p, runs=6, base_seed=10)
    b = estimate_fisher(p, runs=3, base_seed=13)
    assert np.array_equal(a.per_run[3:], b.per_run)


def test_d_phi_halving():
    p = ProtocolParams(M=10, beta=an.beta_from_k0Ts(0.01), phi=0.7, N_max=2**14)
    for est in ("score", "conditional"):
        _, _, rel = d_phi_convergence(p, runs=8, estimator=est)
        assert rel < 0.01


def test_ensemble_mean_nondecreasing():
    p = ProtocolParams(M=5, beta=an.beta_from_k0Ts(0.01), phi=0.7, N_max=2**13)
    est = estimate_fisher(p, runs=96)
    d = np.diff(est.mean_FI)
    assert np.all(d > -2 * np.hypot(est.std_error[1:], est.std_error[:-1]))


def test_fit_exact_cubic():
    cps = checkpoints_pow2(2**12)
    fit = fit_scaling_exponent(_synthetic(3.7 * cps.astype(float) ** 3, cps), (2, 2**12))
    assert fit.exponent == pytest.approx(3.0, abs=1e-6)
    fit = fit_scaling_exponent(_synthetic(0.2 * cps.astype(float) ** 2, cps), (16, 2**12))
    assert fit.exponent == pytest.approx(2.0, abs=1e-6)


def test_fit_noisy_linear():
    rng = np.random.default_rng(3)
    cps = checkpoints_pow2(2**16)[4:]
    y = 5.0 * cps * (1 + 0.05 * rng.standard_normal(cps.size))
    fit = fit_power_law(cps, y)
    assert abs(fit.exponent - 1.0) < 0.1
    assert 0 < fit.ci < 0.1


def test_fit_run_bootstrap():
    rng = np.random.default_rng(1)
    cps = np.array([2**i for i in range(6, 13)])
    runs = cps.astype(float) ** 2 * rng.exponential(size=(64, cps.size))
    est = FisherEstimate.from_runs(cps, runs, 1e-6)
    fit = fit_scaling_exponent(est, (64, 4096))
    assert abs(fit.exponent - 2) < 3 * fit.ci + 0.05


def test_fit_rejects_small_window():
    cps = checkpoints_pow2(2**10)
    est = _synthetic(cps.astype(float) ** 3, cps)
    with pytest.raises(ValueError):
        fit_scaling_exponent(est, (64, 512))
    with pytest.raises(ValueError):
        fit_scaling_exponent(est, (512, 64))
    with pytest.raises(ValueError):
        fit_power_law([1, 2, 3, 4, 5], [1, 2, 0, 4, 5])
