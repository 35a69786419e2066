"""Brute-force reference implementations used to cross-check the engines.

Everything here works in the full ``2**M`` computational basis or enumerates
all measurement records, with operators built directly from Pauli matrices
and ``scipy.linalg.expm``.  Nothing is shared with the fast engines except
the random-number convention: with a fully polarized initial state a
trajectory consumes ``default_rng(seed).random(N)`` in order, and outcome
``+`` (bit 0) occurs when the uniform falls below its probability.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
import scipy.linalg as la

from .states import FULL_SPACE_MAX_M, DickeVector, collective_operators

_SX = np.array([[0, 1], [1, 0]], dtype=complex)
_SY = np.array([[0, -1j], [1j, 0]])
_SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def _check_M(M):
    if not 1 <= M <= FULL_SPACE_MAX_M:
        raise ValueError(f"full-space oracle limited to 1 <= M <= {FULL_SPACE_MAX_M}, got {M}")


def _embed(op, q, M):
    return np.kron(np.kron(np.eye(2**q), op), np.eye(2 ** (M - q - 1)))


def full_collective(M: int):
    """``(Jx, Jy, Jz)`` as dense ``2**M`` matrices, qubit 0 most significant."""
    _check_M(M)
    return tuple(sum(_embed(s / 2, q, M) for q in range(M)) for s in (_SX, _SY, _SZ))


def full_kraus(M: int, beta: float, alpha: float = math.pi / 2):
    Jx = full_collective(M)[0]
    a = la.expm(-2j * beta * Jx)
    b = la.expm(2j * beta * Jx)
    ph = np.exp(-1j * alpha)
    return (a + ph * b) / 2, (a - ph * b) / 2


def product_state(M: int, bloch) -> np.ndarray:
    """``((1 + r.sigma)/2)^{(x) M}`` as a dense density matrix."""
    r = np.asarray(bloch, dtype=float)
    one = 0.5 * (np.eye(2) + r[0] * _SX + r[1] * _SY + r[2] * _SZ)
    rho = np.ones((1, 1), dtype=complex)
    for _ in range(M):
        rho = np.kron(rho, one)
    return rho


def product_vector(M: int, direction) -> np.ndarray:
    """Pure product state with every spin along the unit vector ``direction``."""
    n = np.asarray(direction, dtype=float)
    theta = math.acos(max(-1.0, min(1.0, n[2])))
    az = math.atan2(n[1], n[0])
    one = np.array([math.cos(theta / 2), np.exp(1j * az) * math.sin(theta / 2)])
    psi = np.ones(1, dtype=complex)
    for _ in range(M):
        psi = np.kron(psi, one)
    return psi


def hamming_matrix(M: int) -> np.ndarray:
    idx = np.arange(2**M)
    x = idx[:, None] ^ idx[None, :]
    return np.array([bin(v).count("1") for v in x.ravel()]).reshape(x.shape)


@dataclass
class OracleRecord:
    outcomes: np.ndarray
    probs: np.ndarray


def full_space_trajectory(M, beta, phi, uniforms, alpha=math.pi / 2, direction=(1.0, 0.0, 0.0)):
    """Pure-state trajectory in the ``2**M`` basis driven by given uniforms."""
    Kp, Km = full_kraus(M, beta, alpha)
    Jz = np.diag(full_collective(M)[2]).real
    V = np.exp(-1j * phi * Jz)
    psi = product_vector(M, direction)
    n = len(uniforms)
    out = np.zeros(n, dtype=np.uint8)
    probs = np.zeros(n)
    for t, u in enumerate(uniforms):
        psi = V * psi
        a = Kp @ psi
        p = float(np.vdot(a, a).real)
        probs[t] = p
        if u < p:
            psi = a / math.sqrt(p)
        else:
            out[t] = 1
            b = Km @ psi
            psi = b / np.linalg.norm(b)
    return OracleRecord(out, probs)


def full_space_density_trajectory(M, beta, phi, uniforms, gamma2=0.0, bloch=(1.0, 0.0, 0.0),
                                  alpha=math.pi / 2):
    """Density-matrix trajectory with independent per-spin dephasing.

    Every step multiplies ``rho_ab`` by ``exp(-gamma2 hamming(a, b))``,
    precesses, then measures.
    """
    Kp, Km = full_kraus(M, beta, alpha)
    Jz = np.diag(full_collective(M)[2]).real
    F = np.exp(-1j * phi * (Jz[:, None] - Jz[None, :])) * np.exp(-gamma2 * hamming_matrix(M))
    rho = product_state(M, bloch)
    n = len(uniforms)
    out = np.zeros(n, dtype=np.uint8)
    probs = np.zeros(n)
    for t, u in enumerate(uniforms):
        rho = rho * F
        a = Kp @ rho @ Kp.conj().T
        p = float(np.trace(a).real)
        probs[t] = p
        if u < p:
            rho = a / p
        else:
            out[t] = 1
            b = Km @ rho @ Km.conj().T
            rho = b / np.trace(b).real
    return OracleRecord(out, probs)


def exhaustive_fisher(M: int, beta: float, phi: float, N: int, tau_m: float = 1.0,
                      alpha: float = math.pi / 2, return_total: bool = False):
    """Exact record Fisher information by enumerating all ``2**N`` records.

    Propagates unnormalized conditional states together with their exact
    phase derivative, so ``p_X = |psi_X|^2`` and
    ``dp_X = 2 Re <psi_X | d psi_X>``.  Returns ``tau_m**2 sum_X dp_X^2 / p_X``
    (and ``sum_X p_X`` if ``return_total``).
    """
    if N > 20:
        raise ValueError("exhaustive enumeration limited to N <= 20")
    Jx, _, Jz = collective_operators(M)
    a = la.expm(-2j * beta * Jx)
    b = la.expm(2j * beta * Jx)
    ph = np.exp(-1j * alpha)
    K = np.stack([(a + ph * b) / 2, (a - ph * b) / 2])
    jz = np.diag(Jz).real
    V = np.exp(-1j * phi * jz)
    dV = -1j * jz * V
    psi = DickeVector.coherent(M, (1.0, 0.0, 0.0)).amplitudes[None, :]
    dpsi = np.zeros_like(psi)
    for _ in range(N):
        y = V * psi
        dy = dV * psi + V * dpsi
        # branch on the outcome: (records, D) -> (records * 2, D)
        psi = np.einsum("kij,rj->rki", K, y).reshape(-1, M + 1)
        dpsi = np.einsum("kij,rj->rki", K, dy).reshape(-1, M + 1)
    p = np.sum(np.abs(psi) ** 2, axis=1)
    dp = 2.0 * np.sum((psi.conj() * dpsi).real, axis=1)
    keep = p > 0
    fi = tau_m**2 * float(np.sum(dp[keep] ** 2 / p[keep]))
    if return_total:
        return fi, float(p.sum())
    return fi


# --- validation suite -------------------------------------------------------


@dataclass
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def _uniforms(seed, N):
    return np.random.default_rng(int(seed)).random(N)


def check_dicke_vs_full(M_values, seeds, N=100, k0Ts=0.1, phi=0.7) -> Check:
    from .protocol import ProtocolParams, run_trajectory

    worst, mismatched = 0.0, 0
    for M in M_values:
        p = ProtocolParams.from_k0Ts(k0Ts, M=M, phi=phi, N_max=N)
        for s in seeds:
            rec = run_trajectory(p, s, [N], siblings=False, record_probs=True, engine="pure")
            ref = full_space_trajectory(M, p.beta, phi, _uniforms(s, N))
            mismatched += int(np.any(rec.outcomes != ref.outcomes))
            worst = max(worst, float(np.max(np.abs(rec.probs - ref.probs))))
    ok = mismatched == 0 and worst < 1e-10
    return Check("dicke_vs_full_space", ok,
                 f"M={list(M_values)}, {len(seeds)} seeds, N={N}: {mismatched} outcome mismatches, "
                 f"max |dp| = {worst:.2e}")


def check_density_vs_full(M_values, seeds, engine="local", N=60, k0Ts=0.2, phi=0.7, gamma2=0.05,
                          polarization=0.8) -> Check:
    from .protocol import ProtocolParams, run_trajectory

    worst, mismatched = 0.0, 0
    for M in M_values:
        p = ProtocolParams.from_k0Ts(k0Ts, M=M, phi=phi, N_max=N, gamma2=gamma2,
                                     polarization=polarization)
        for s in seeds:
            rec = run_trajectory(p, s, [N], siblings=False, record_probs=True, engine=engine)
            ref = full_space_density_trajectory(M, p.beta, phi, _uniforms(s, N), gamma2,
                                                (polarization, 0.0, 0.0))
            mismatched += int(np.any(rec.outcomes != ref.outcomes))
            worst = max(worst, float(np.max(np.abs(rec.probs - ref.probs))))
    ok = mismatched == 0 and worst < 1e-10
    return Check(f"{engine}_dephasing_vs_full_space", ok,
                 f"M={list(M_values)}, gamma2={gamma2}, P={polarization}: {mismatched} outcome "
                 f"mismatches, max |dp| = {worst:.2e}")


def check_kraus_completeness(M_values, k0Ts=0.3) -> Check:
    from .protocol import entangling_kraus

    worst = 0.0
    for M in M_values:
        for alpha in (math.pi / 2, 0.3):
            Kp, Km = entangling_kraus(M, 2 * k0Ts / math.pi, alpha)
            worst = max(worst, float(np.max(np.abs(Kp.conj().T @ Kp + Km.conj().T @ Km - np.eye(M + 1)))))
    return Check("kraus_completeness", worst < 1e-12, f"max |U+^dag U+ + U-^dag U- - 1| = {worst:.2e}")


def check_exhaustive_fisher(runs=2000, M=2, N=10, beta=0.3, phi=0.7, seed=0) -> Check:
    from .fisher import estimate_fisher_all
    from .protocol import ProtocolParams

    exact, total = exhaustive_fisher(M, beta, phi, N, return_total=True)
    p = ProtocolParams(M=M, beta=beta, phi=phi, N_max=N)
    est = estimate_fisher_all(p, runs, seed, [N])
    ok = abs(total - 1.0) < 1e-12
    parts = [f"sum_X p_X - 1 = {total - 1:.1e}", f"exact FI = {exact:.6g}"]
    for name, e in est.items():
        m, se = e.at(N)
        z = (m - exact) / se
        ok &= abs(z) < 3.0
        parts.append(f"{name} {m:.6g} +- {se:.2g} (z = {z:+.2f})")
    return Check("exhaustive_fisher", ok, f"M={M}, N={N}, {runs} runs: " + ", ".join(parts))


def check_schmidt_vs_full(M_values, seed=0) -> Check:
    from .entanglement import Bipartition, schmidt_coefficients
    from .states import dicke_to_full

    rng = np.random.default_rng(seed)
    worst = 0.0
    for M in M_values:
        if M < 2:
            continue
        st = DickeVector.random(M, rng)
        full = dicke_to_full(st).amplitudes
        for M1 in range(1, M):
            ref = np.linalg.svd(full.reshape(2**M1, 2 ** (M - M1)), compute_uv=False)
            got = schmidt_coefficients(st, Bipartition(M1, M - M1))
            n = got.size
            worst = max(worst, float(np.max(np.abs(ref[:n] - got))), float(np.max(ref[n:], initial=0.0)))
    return Check("schmidt_vs_full_space", worst < 1e-9, f"max deviation {worst:.2e}")


def check_blocks_vs_full(M_values, bloch=(0.6, 0.3, -0.2)) -> Check:
    from . import permutational as perm

    worst = 0.0
    for M in M_values:
        ref = product_state(M, bloch)
        got = perm.blocks_to_full(perm.product_state_blocks(M, bloch), M)
        worst = max(worst, float(np.max(np.abs(ref - got))))
    return Check("mixed_product_blocks_vs_full_space", worst < 1e-10, f"max deviation {worst:.2e}")


def validate(max_M: int = 6, seeds: int = 5, exhaustive_runs: int = 2000) -> list:
    """Run every cross-check for ``M <= max_M`` and return :class:`Check` results."""
    if max_M < 1:
        raise ValueError("max_M must be >= 1")
    if max_M > FULL_SPACE_MAX_M:
        raise ValueError(f"max_M limited to {FULL_SPACE_MAX_M}")
    Ms = list(range(1, max_M + 1))
    small = [m for m in Ms if m <= 5]
    sd = list(range(seeds))
    return [
        check_kraus_completeness(Ms),
        check_dicke_vs_full(Ms, sd),
        check_density_vs_full(small, sd, engine="local"),
        check_density_vs_full([1], sd, engine="collective", polarization=1.0),
        check_blocks_vs_full(small),
        check_schmidt_vs_full(Ms),
        check_exhaustive_fisher(exhaustive_runs),
    ]
