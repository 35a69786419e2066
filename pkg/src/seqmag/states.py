"""Auxiliary-spin register representations.

Pure collective states of ``M`` spin-1/2 particles live in the ``M + 1``
dimensional symmetric (Dicke) subspace.  Amplitudes are indexed by the
excitation number ``k = 0..M`` (number of flipped spins), which is the
``Jz`` eigenbasis with eigenvalue ``M/2 - k``.

A few helpers expand these states into the full ``2**M`` Hilbert space; they
exist as independent oracles for small ``M`` and are guarded against memory
blow-up.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

FULL_SPACE_MAX_M = 12


def log_binom(n, k):
    """Natural log of the binomial coefficient, elementwise over ``k``."""
    k = np.asarray(k, dtype=float)
    return gammaln(n + 1) - gammaln(k + 1) - gammaln(n - k + 1)


def _readonly(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


def collective_operators(M: int):
    """Return ``(Jx, Jy, Jz)`` for total spin ``J = M/2`` in the Dicke basis.

    ``Jz`` is diagonal with entries ``M/2, M/2 - 1, ..., -M/2``.
    """
    M = int(M)
    if M < 1:
        raise ValueError(f"M must be a positive integer, got {M}")
    j = M / 2
    m = j - np.arange(M + 1)
    # <m+1|J+|m> sits one row above the diagonal since m decreases with k
    ladder = np.sqrt(j * (j + 1) - m[1:] * (m[1:] + 1))
    Jp = np.diag(ladder, 1).astype(complex)
    Jm = Jp.conj().T
    Jx = (Jp + Jm) / 2
    Jy = (Jp - Jm) / 2j
    Jz = np.diag(m).astype(complex)
    return Jx, Jy, Jz


def jz_values(M: int) -> np.ndarray:
    """Diagonal of ``Jz`` over Dicke levels, ``M/2 - k``."""
    return M / 2 - np.arange(M + 1)


@dataclass(frozen=True)
class DickeVector:
    """Pure state of ``M`` spins in the symmetric subspace (``Jz`` basis)."""

    M: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        amp = np.asarray(self.amplitudes, dtype=complex)
        if self.M < 1:
            raise ValueError(f"M must be >= 1, got {self.M}")
        if amp.shape != (self.M + 1,):
            raise ValueError(f"expected {self.M + 1} amplitudes, got shape {amp.shape}")
        object.__setattr__(self, "amplitudes", _readonly(amp))

    @classmethod
    def level(cls, M: int, k: int) -> DickeVector:
        """Dicke state with exactly ``k`` excitations."""
        if not 0 <= k <= M:
            raise ValueError(f"level k={k} outside 0..{M}")
        amp = np.zeros(M + 1, dtype=complex)
        amp[k] = 1.0
        return cls(M, amp)

    @classmethod
    def coherent(cls, M: int, direction) -> DickeVector:
        """Spin-coherent state ``|n>^{\\otimes M}`` for a unit Bloch vector ``n``."""
        n = np.asarray(direction, dtype=float)
        norm = np.linalg.norm(n)
        if not np.isclose(norm, 1.0, atol=1e-12):
            raise ValueError(f"coherent state needs a unit Bloch vector, |n|={norm}")
        theta = np.arccos(np.clip(n[2] / norm, -1.0, 1.0))
        azim = np.arctan2(n[1], n[0])
        return cls(M, coherent_amplitudes(M, theta, azim))

    @classmethod
    def random(cls, M: int, rng) -> DickeVector:
        amp = rng.normal(size=M + 1) + 1j * rng.normal(size=M + 1)
        return cls(M, amp / np.linalg.norm(amp))

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalized(self) -> DickeVector:
        return DickeVector(self.M, self.amplitudes / self.norm)


def coherent_amplitudes(M: int, theta: float, azim: float) -> np.ndarray:
    """Dicke amplitudes of ``M`` spins all pointing along polar angles (theta, azim).

    Evaluated in log space so that ``M`` in the hundreds does not overflow.
    """
    k = np.arange(M + 1)
    c, s = np.cos(theta / 2), np.sin(theta / 2)
    amp = np.zeros(M + 1, dtype=complex)
    # exact zeros at the poles would make log() blow up
    if s == 0.0:
        amp[0] = 1.0
        return amp
    if c == 0.0:
        amp[M] = np.exp(1j * M * azim)
        return amp
    logmag = 0.5 * log_binom(M, k) + (M - k) * np.log(abs(c)) + k * np.log(abs(s))
    sign = np.sign(c) ** (M - k) * np.sign(s) ** k
    return sign * np.exp(logmag) * np.exp(1j * k * azim)


@dataclass(frozen=True)
class GroupedState:
    """Tensor product of per-group Dicke vectors."""

    groups: tuple

    def __post_init__(self):
        groups = tuple(self.groups)
        if not groups:
            raise ValueError("GroupedState needs at least one group")
        for g in groups:
            if not isinstance(g, DickeVector):
                raise TypeError("groups must be DickeVector instances")
            if abs(g.norm - 1.0) > 1e-10:
                raise ValueError(f"group state not normalized (norm {g.norm})")
        object.__setattr__(self, "groups", groups)

    @property
    def sizes(self) -> tuple:
        return tuple(g.M for g in self.groups)

    @property
    def M(self) -> int:
        return sum(self.sizes)

    def joint(self) -> np.ndarray:
        """Flattened amplitudes on the product of the group Dicke bases."""
        out = np.ones(1, dtype=complex)
        for g in self.groups:
            out = np.kron(out, g.amplitudes)
        return out


@dataclass(frozen=True)
class FullState:
    """State on the full ``2**M`` space; vector if pure, matrix if mixed."""

    M: int
    amplitudes: np.ndarray = field(repr=False)

    def __post_init__(self):
        if self.M > FULL_SPACE_MAX_M:
            raise ValueError(f"full-space states limited to M <= {FULL_SPACE_MAX_M}")
        a = np.asarray(self.amplitudes, dtype=complex)
        dim = 2**self.M
        if a.shape not in ((dim,), (dim, dim)):
            raise ValueError(f"bad shape {a.shape} for M={self.M}")
        if a.ndim == 1:
            if abs(np.linalg.norm(a) - 1.0) > 1e-10:
                raise ValueError(f"pure state not normalized: |psi| = {np.linalg.norm(a):.12g}")
        else:
            if np.max(np.abs(a - a.conj().T)) > 1e-10:
                raise ValueError("density matrix is not Hermitian")
            if abs(np.trace(a).real - 1.0) > 1e-12:
                raise ValueError(f"density matrix trace {np.trace(a).real:.15g} != 1")
            if np.linalg.eigvalsh(0.5 * (a + a.conj().T))[0] < -1e-10:
                raise ValueError("density matrix is not positive semidefinite")
        object.__setattr__(self, "amplitudes", _readonly(a))

    @property
    def is_pure(self) -> bool:
        return self.amplitudes.ndim == 1

    def density(self) -> np.ndarray:
        if self.is_pure:
            return np.outer(self.amplitudes, self.amplitudes.conj())
        return np.array(self.amplitudes)


@dataclass(frozen=True)
class EnsembleGroup:
    """One permutation-symmetric group of spins sharing coupling and initial state.

    ``initial_bloch`` with norm below one encodes partial polarization: each
    spin is then drawn independently along ``+n`` or ``-n``.
    """

    size: int
    initial_bloch: tuple = (1.0, 0.0, 0.0)
    beta: float | None = None
    phi0: float = 0.0

    def __post_init__(self):
        if int(self.size) < 1:
            raise ValueError(f"group size must be positive, got {self.size}")
        b = tuple(float(x) for x in self.initial_bloch)
        if len(b) != 3:
            raise ValueError("initial_bloch must be a 3-vector")
        if np.linalg.norm(b) > 1.0 + 1e-12:
            raise ValueError(f"|initial_bloch| must be <= 1, got {np.linalg.norm(b):.6g}")
        object.__setattr__(self, "initial_bloch", b)
        object.__setattr__(self, "size", int(self.size))

    @property
    def polarization(self) -> float:
        return float(np.linalg.norm(self.initial_bloch))


@dataclass(frozen=True)
class SpinEnsembleSpec:
    M: int
    groups: tuple

    def __post_init__(self):
        groups = tuple(self.groups)
        if not groups:
            raise ValueError("SpinEnsembleSpec needs at least one group")
        total = sum(g.size for g in groups)
        if total != self.M:
            raise ValueError(f"group sizes sum to {total}, expected M={self.M}")
        object.__setattr__(self, "groups", groups)

    @classmethod
    def uniform(cls, M: int, polarization: float = 1.0, beta=None) -> SpinEnsembleSpec:
        """All spins in one group, polarized along +x."""
        return cls(M, (EnsembleGroup(M, (polarization, 0.0, 0.0), beta),))


def _popcounts(M: int) -> np.ndarray:
    idx = np.arange(2**M)
    return np.array([bin(i).count("1") for i in idx])


def dicke_to_full(state: DickeVector) -> FullState:
    """Expand a Dicke vector into the computational basis of ``M`` qubits.

    Bit value 1 marks a flipped spin; qubit 0 is the most significant bit.
    """
    M = state.M
    if M > FULL_SPACE_MAX_M:
        raise ValueError(f"dicke_to_full limited to M <= {FULL_SPACE_MAX_M}, got {M}")
    k = _popcounts(M)
    weights = np.exp(-0.5 * log_binom(M, np.arange(M + 1)))
    return FullState(M, state.amplitudes[k] * weights[k])


def bipartite_expand(state: DickeVector, M1: int, M2: int) -> np.ndarray:
    """Coefficient matrix of ``state`` across a split into ``M1`` and ``M2`` spins.

    Entry ``(k1, k2)`` is ``a[k1+k2] * sqrt(C(M1,k1) C(M2,k2) / C(M,k1+k2))``,
    i.e. the Schmidt form in the product of the two smaller Dicke bases.
    """
    M = state.M
    if M1 < 1 or M2 < 1 or M1 + M2 != M:
        raise ValueError(f"invalid bipartition ({M1}, {M2}) of M={M}")
    k1 = np.arange(M1 + 1)[:, None]
    k2 = np.arange(M2 + 1)[None, :]
    ktot = k1 + k2
    logw = 0.5 * (log_binom(M1, k1) + log_binom(M2, k2) - log_binom(M, ktot))
    return state.amplitudes[ktot] * np.exp(logw)
