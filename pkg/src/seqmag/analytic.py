"""Closed-form expressions for the limited-control magnetometry protocol.

Fisher informations are with respect to the detuning ``delta`` (rad/s),
i.e. ``tau_m**2`` times the information about the per-step phase.  The
full-control benchmark :func:`hl_fisher` uses the same convention.
"""

from __future__ import annotations

from dataclasses import dataclass
import math

import numpy as np
from scipy.special import gammainc


@dataclass(frozen=True)
class PhysicalConstants:
    """``hbar`` (J s) and magnetic moments of auxiliary spin and sensor (J/T)."""

    hbar: float = 1.054571817e-34
    mu_n: float = 1.41060679736e-26  # proton
    mu_e: float = 9.2740100783e-24  # Bohr magneton

    def __post_init__(self):
        if min(self.hbar, self.mu_n, self.mu_e) <= 0:
            raise ValueError("physical constants must be strictly positive")


def beta_from_k0Ts(k0Ts):
    return 2.0 * np.asarray(k0Ts, dtype=float) / math.pi if np.ndim(k0Ts) else 2.0 * k0Ts / math.pi


def heisenberg_uncertainty(M: int, T: float, c: PhysicalConstants = PhysicalConstants()) -> float:
    """Full-control field uncertainty ``hbar / (mu_n (M+1) T)`` for M+1 particles."""
    if T <= 0:
        raise ValueError("T must be positive")
    return c.hbar / (c.mu_n * (M + 1) * T)


def hl_fisher(M, N, tau_m=1.0):
    """Heisenberg-limit Fisher information ``(M+1)^2 (N tau_m)^2`` about delta."""
    N = np.asarray(N, dtype=float)
    return (M + 1) ** 2 * (N * tau_m) ** 2


def signal_probability(n, M, k0Ts, phi):
    """Weak-coupling signal ``cos^2(2 M k0Ts/pi cos(phi n) - pi/4)``.

    Valid for ``M k0Ts << 1``; see :func:`signal_probability_general` for the
    exact product form.
    """
    n = np.asarray(n, dtype=float)
    p = np.cos(2.0 * M * k0Ts / math.pi * np.cos(phi * n) - math.pi / 4) ** 2
    return np.clip(p, 0.0, 1.0)


def signal_probability_general(couplings, phases, P=1.0, alpha=math.pi / 2) -> float:
    """Exact readout probability for spins with individual couplings and phases.

    ``couplings`` are the effective angles ``beta_m = 2 A_m Ts / pi`` and
    ``phases`` the accumulated precession phases of the spin Bloch vectors
    (relative to their coupling axis).  Each spin has polarization ``P``.
    """
    beta = np.asarray(couplings, dtype=float)
    ph = np.asarray(phases, dtype=float)
    if beta.shape != ph.shape:
        raise ValueError(f"couplings and phases differ in length ({beta.shape} vs {ph.shape})")
    c = np.cos(2.0 * beta)
    s = np.sin(2.0 * beta) * P * np.cos(ph)
    minus = np.prod(c - 1j * s)
    plus = np.prod(c + 1j * s)
    val = 0.5 + 0.25 * (math.cos(alpha) * (minus + plus) + 1j * math.sin(alpha) * (minus - plus))
    if abs(val.imag) > 1e-12:
        raise ArithmeticError(f"non-real probability {val}")
    return min(max(float(val.real), 0.0), 1.0)


def backaction_rate(beta, exact: bool = False, gamma2: float = 0.0):
    """Per-step coherence decay caused by the sensor measurement.

    The leading-order rate is ``beta**2``.  With ``exact=True`` the Bloch-vector
    shrink factor ``(1 + cos 2 beta)/2`` is used and ``gamma2`` is added, giving
    the total decay rate ``-log((1 + cos 2 beta)/2) + gamma2``.
    """
    if gamma2 < 0:
        raise ValueError("gamma2 must be non-negative")
    beta = np.asarray(beta, dtype=float)
    if exact:
        out = -np.log1p(-np.sin(beta) ** 2) + gamma2
    else:
        out = beta**2
    return float(out) if out.ndim == 0 else out


def gamma_b(k0Ts):
    """Leading-order backaction rate ``4 k0^2 Ts^2 / pi^2``."""
    return 4.0 * k0Ts**2 / math.pi**2


def total_decay(beta, gamma2=0.0, exact=True):
    """Decay rate used in the Fisher sums: backaction plus nuclear dephasing."""
    if exact:
        return backaction_rate(beta, exact=True, gamma2=gamma2)
    return backaction_rate(beta) + gamma2


def fisher_sum_exact(N, M, k0Ts, tau_m, gamma, phi):
    """``sum_{n=1}^N (4 tau_m M k0 Ts e^{-gamma n} n / pi)^2 sin^2(phi n)``.

    ``N`` may be an increasing array of checkpoints, in which case the
    running sum is returned at each.  Accumulates in blocks so ``N`` up to
    ``2**26`` stays within a few MB.
    """
    Ns = np.atleast_1d(np.asarray(N, dtype=np.int64))
    if np.any(Ns < 1):
        raise ValueError("N must be >= 1")
    if np.any(np.diff(Ns) < 0):
        raise ValueError("checkpoints must be non-decreasing")
    pref = (4.0 * tau_m * M * k0Ts / math.pi) ** 2
    out = np.empty(Ns.size)
    total = 0.0
    start = 1
    block = 1 << 20
    for i, target in enumerate(Ns):
        while start <= target:
            stop = min(int(target), start + block - 1)
            n = np.arange(start, stop + 1, dtype=float)
            total += float(np.sum(n * n * np.exp(-2.0 * gamma * n) * np.sin(phi * n) ** 2))
            start = stop + 1
        out[i] = pref * total
    return float(out[0]) if np.ndim(N) == 0 else out


def _closed_pref(M, k0Ts, tau_m):
    return 2.0 * M**2 * tau_m**2 * k0Ts**2 / math.pi**2


def fisher_closed_form(N, M, k0Ts, tau_m, gamma):
    """Integral approximation of :func:`fisher_sum_exact`.

    ``pref * (1 - e^{-2 gamma N}(1 + 2 gamma N (1 + gamma N))) / gamma**3`` with
    ``pref = 2 M^2 tau_m^2 k0^2 Ts^2 / pi^2``; the bracket is the regularized
    incomplete gamma function ``P(3, 2 gamma N)``, which stays accurate as
    ``gamma -> 0`` where the limit is ``pref * 4 N^3 / 3``.
    """
    N = np.asarray(N, dtype=float)
    if gamma < 0:
        raise ValueError("gamma must be non-negative")
    pref = _closed_pref(M, k0Ts, tau_m)
    if gamma == 0:
        out = pref * 4.0 * N**3 / 3.0
    else:
        x = 2.0 * gamma * N
        # P(3, x) * 2 / x**3 -> 1/3 as x -> 0; written to avoid 0/0
        out = pref * 8.0 * N**3 * np.where(x > 0, gammainc(3, x) / np.where(x > 0, x, 1.0) ** 3, 1.0 / 6.0)
    return float(out) if out.ndim == 0 else out


def fisher_series(N, M, k0Ts, tau_m, gamma):
    """Small ``gamma N`` expansion ``pref (4N^3/3 - 2 gamma N^4 + 8 gamma^2 N^5 / 5)``."""
    N = np.asarray(N, dtype=float)
    out = _closed_pref(M, k0Ts, tau_m) * (4 * N**3 / 3 - 2 * gamma * N**4 + 8 * gamma**2 * N**5 / 5)
    return float(out) if out.ndim == 0 else out


def closed_form_validity(N, M, k0Ts, gamma, phi, margin=0.1):
    """Flags for the regime where :func:`fisher_closed_form` applies.

    ``margin`` is the ratio below which "much smaller than" is taken to hold.
    """
    return {
        "slow_decay": max(gamma, 1.0 / N) < margin * 2 * math.pi * phi,
        "weak_coupling": M * k0Ts < margin,
        "small_gamma_N": gamma * N < 0.6,
    }


def uncertainty_bound(N, M, k0Ts, tau_m, c: PhysicalConstants = PhysicalConstants()):
    """Field uncertainty ``sqrt(3 pi^2 hbar^2 / (8 mu_n^2 M^2 tau_m^2 k0^2 Ts^2 N^3))``."""
    N = np.asarray(N, dtype=float)
    out = np.sqrt(3 * math.pi**2 * c.hbar**2 / (8 * c.mu_n**2 * M**2 * tau_m**2 * k0Ts**2 * N**3))
    return float(out) if out.ndim == 0 else out


def fisher_asymptote(N, M, k0Ts, tau_m, gamma_b, gamma2=0.0):
    """Large ``gamma N`` Fisher information, returned as ``(plain, corrected)``.

    ``plain`` is ``sin^4(4 k0Ts/pi) / (16 (gamma_b + gamma2)^3) * M^2/2 * tau_m^2 N``.
    ``corrected`` rescales the single-spin second-order estimate
    ``sin^4(4 k0Ts/pi) tau_m^2 N / (8 gamma^3)`` by the empirical factor
    ``1/2`` for one spin and ``cos(4 k0Ts/pi)^(2(M-1)) M^2 / 4`` otherwise.
    For one spin the corrected value is therefore twice ``plain``.
    ``M`` and ``N`` broadcast.
    """
    g = gamma_b + gamma2
    if g <= 0:
        raise ValueError("gamma_b + gamma2 must be positive")
    N = np.asarray(N, dtype=float)
    M = np.asarray(M, dtype=float)
    if np.any(M < 1):
        raise ValueError("M must be >= 1")
    s4 = math.sin(4 * k0Ts / math.pi) ** 4
    plain = s4 / (16 * g**3) * M**2 / 2 * tau_m**2 * N
    second_order = s4 * tau_m**2 * N / (8 * g**3)
    factor = np.where(M == 1, 0.5, math.cos(4 * k0Ts / math.pi) ** (2 * (M - 1)) * M**2 / 4)
    corrected = second_order * factor
    if plain.ndim == 0:
        return float(plain), float(corrected)
    return plain, corrected


def nv_alone_uncertainty(T2_nv, T, c: PhysicalConstants = PhysicalConstants()):
    """Bare-sensor Ramsey uncertainty ``sqrt(2 e hbar^2 / (mu_e^2 T2 T))``."""
    if T2_nv <= 0 or T <= 0:
        raise ValueError("T2_nv and T must be positive")
    return math.sqrt(2 * math.e * c.hbar**2 / (c.mu_e**2 * T2_nv * T))


def crossover_M(ratio):
    """Spin count above which the assisted sensor wins.

    ``ratio`` is ``(mu_e/mu_n)^2 * T2_nv / T2_n``; the threshold is
    ``sqrt(27/(4e) * ratio)``.
    """
    if ratio <= 0:
        raise ValueError("ratio must be positive")
    return math.sqrt(27.0 / (4.0 * math.e) * ratio)


def cramer_rao(I):
    """Smallest achievable standard deviation ``1/sqrt(I)`` of an unbiased estimate."""
    I = np.asarray(I, dtype=float)
    if np.any(I <= 0):
        raise ValueError("Fisher information must be positive")
    out = 1.0 / np.sqrt(I)
    return float(out) if out.ndim == 0 else out


def field_uncertainty(I, c: PhysicalConstants = PhysicalConstants()):
    """Convert a detuning Fisher information into a field uncertainty (T).

    ``delta = mu_n B / hbar`` up to the reference offset, so the bound scales
    by ``hbar / mu_n``.
    """
    return c.hbar / c.mu_n * cramer_rao(I)
