"""Permutation-invariant density matrices of M spin-1/2 particles.

Any state that is symmetric under spin permutations decomposes into blocks
of total spin ``j = M/2, M/2 - 1, ...``:

    rho = sum_j  (w_j / d_j) (x) 1_{d_j},

with ``d_j`` the multiplicity of spin ``j`` and ``w_j`` a
``(2j+1) x (2j+1)`` matrix in the ``Jz`` basis (``m = j, j-1, ..., -j``).
Storing the weighted blocks ``w_j`` keeps ``Tr rho = sum_j Tr w_j``.
Collective operators act block by block; independent dephasing of every
spin mixes neighbouring ``j`` at fixed ``(m, m')``.  The mixing coefficients
follow from coupling one spin to the remaining ``M - 1`` with
Clebsch-Gordan coefficients.
"""

from __future__ import annotations

from functools import lru_cache
import math

import numpy as np
import scipy.linalg as la
from scipy.special import gammaln


def block_spins(M: int) -> np.ndarray:
    """Total spins ``j`` present for ``M`` spin-1/2 particles, descending."""
    return M / 2 - np.arange(M // 2 + 1)


def log_multiplicity(M: int, j: float) -> float:
    """``ln d_j`` with ``d_j = C(M, M/2 - j) (2j + 1) / (M/2 + j + 1)``."""
    k = int(round(M / 2 - j))
    return float(gammaln(M + 1) - gammaln(k + 1) - gammaln(M - k + 1)
                 + math.log(2 * j + 1) - math.log(M / 2 + j + 1))


def spin_matrices(j: float):
    """``(Jx, Jy, Jz)`` for spin ``j`` (including ``j = 0``), ``m`` descending."""
    n = int(round(2 * j)) + 1
    m = j - np.arange(n)
    ladder = np.sqrt(np.maximum(j * (j + 1) - m[1:] * (m[1:] + 1), 0.0))
    Jp = np.diag(ladder, 1).astype(complex)
    Jm = Jp.conj().T
    return (Jp + Jm) / 2, (Jp - Jm) / 2j, np.diag(m).astype(complex)


def _cg_half(j1: float, j: float, m: float):
    """``<j1, m - s; 1/2, s | j, m>`` for ``s = +1/2, -1/2``."""
    den = 2 * j1 + 1
    up = math.sqrt(max(j1 + m + 0.5, 0.0) / den)
    dn = math.sqrt(max(j1 - m + 0.5, 0.0) / den)
    if math.isclose(j, j1 + 0.5):
        return up, dn
    return -dn, up


def _sigma_last(j1: float, ja: float, jb: float, m: float) -> float:
    """``<ja, m| sigma_z^(last) |jb, m>`` inside the ``j1 (x) 1/2`` coupling."""
    a = _cg_half(j1, ja, m)
    b = _cg_half(j1, jb, m)
    return a[0] * b[0] - a[1] * b[1]


def dephasing_generator(M: int, m: float, mp: float) -> tuple:
    """Matrix of ``X -> sum_i sigma_z^i X sigma_z^i`` on weighted blocks.

    Acts on the entries ``(m, m')`` of all blocks with ``j >= max(|m|, |m'|)``;
    returns ``(js, S)`` with ``S[a, b]`` the weight sent from block ``js[b]``
    to block ``js[a]``.
    """
    jmin = max(abs(m), abs(mp))
    js = [j for j in block_spins(M) if j >= jmin - 1e-9]
    n = len(js)
    S = np.zeros((n, n))
    if M == 1:
        S[0, 0] = (2 * m) * (2 * mp)
        return np.array(js), S
    logd = {j: log_multiplicity(M, j) for j in js}
    for b, jb in enumerate(js):
        for a, ja in enumerate(js):
            if abs(ja - jb) > 1 + 1e-9:
                continue
            tot = 0.0
            for j1 in {jb - 0.5, jb + 0.5} & {ja - 0.5, ja + 0.5}:
                if j1 < 0 or j1 > (M - 1) / 2 + 1e-9 or max(abs(m), abs(mp)) > j1 + 0.5 + 1e-9:
                    continue
                # multiplicity of j1 among the other M-1 spins
                ld1 = log_multiplicity(M - 1, j1)
                tot += math.exp(ld1 - logd[ja]) * _sigma_last(j1, ja, jb, m) * _sigma_last(j1, ja, jb, mp)
            # coefficient on E^{ja}; weighted blocks carry an extra d_ja / d_jb
            S[a, b] = M * tot * math.exp(logd[ja] - logd[jb])
    return np.array(js), S


class BlockLayout:
    """Packed storage of all blocks ``w_j`` in one flat complex vector."""

    def __init__(self, M: int):
        self.M = int(M)
        self.js = block_spins(self.M)
        self.sizes = np.array([int(round(2 * j)) + 1 for j in self.js], dtype=np.intp)
        self.offsets = np.concatenate([[0], np.cumsum(self.sizes**2)[:-1]]).astype(np.intp)
        self.length = int(np.sum(self.sizes**2))

    def block(self, vec, b):
        n, o = self.sizes[b], self.offsets[b]
        return vec[..., o:o + n * n].reshape(vec.shape[:-1] + (n, n))

    def pack(self, blocks) -> np.ndarray:
        return np.concatenate([np.asarray(w).ravel() for w in blocks])

    def unpack(self, vec):
        return [self.block(vec, b) for b in range(len(self.js))]

    def index(self, b: int, m: float, mp: float) -> int:
        j = self.js[b]
        r, c = int(round(j - m)), int(round(j - mp))
        return int(self.offsets[b] + r * self.sizes[b] + c)

    def m_values(self) -> tuple:
        """Per packed entry ``(m, m')``."""
        ms, mps = [], []
        for j, n in zip(self.js, self.sizes):
            m = j - np.arange(n)
            ms.append(np.repeat(m, n))
            mps.append(np.tile(m, n))
        return np.concatenate(ms), np.concatenate(mps)


@lru_cache(maxsize=64)
def layout(M: int) -> BlockLayout:
    return BlockLayout(M)


@lru_cache(maxsize=64)
def dephasing_channel(M: int, gamma2: float):
    """One step of independent dephasing as a sparse CSR map on packed blocks.

    Each spin's coherence shrinks by ``exp(-gamma2)``.  In the computational
    basis this multiplies ``rho_ab`` by ``exp(-gamma2 * hamming(a, b))``,
    i.e. ``exp(-gamma2 (M - S) / 2)`` with ``S`` from
    :func:`dephasing_generator`.  Returns ``(data, indices, indptr)``.
    """
    lay = layout(M)
    rows, cols, vals = [], [], []
    block_j = block_spins(M)
    all_m = M / 2 - np.arange(M + 1)
    for m in all_m:
        for mp in all_m:
            js, S = dephasing_generator(M, m, mp)
            if gamma2 == 0:
                D = np.eye(len(js))
            else:
                D = la.expm(-0.5 * gamma2 * (M * np.eye(len(js)) - S))
            bidx = [int(np.flatnonzero(np.isclose(block_j, j))[0]) for j in js]
            flat = [lay.index(b, m, mp) for b in bidx]
            for a in range(len(js)):
                for c in range(len(js)):
                    if D[a, c] != 0.0:
                        rows.append(flat[a])
                        cols.append(flat[c])
                        vals.append(D[a, c])
    order = np.lexsort((cols, rows))
    rows = np.asarray(rows)[order]
    cols = np.asarray(cols, dtype=np.intp)[order]
    vals = np.asarray(vals)[order]
    indptr = np.zeros(lay.length + 1, dtype=np.intp)
    np.add.at(indptr, rows + 1, 1)
    indptr = np.cumsum(indptr).astype(np.intp)
    for a in (vals, cols, indptr):
        a.setflags(write=False)
    return vals, cols, indptr


def product_state_blocks(M: int, bloch, phi0: float = 0.0) -> list:
    """Weighted blocks of ``((1 + r.sigma)/2)^{(x) M}`` with ``|r| <= 1``.

    In the eigenbasis of ``n.J`` (``n = r/|r|``) the product state weighs a
    level with eigenvalue ``x`` by ``p^{M/2 + x} (1-p)^{M/2 - x}``,
    ``p = (1 + |r|)/2``, in every block; block ``j`` carries ``d_j`` copies.
    ``phi0`` rotates the state by ``exp(+i phi0 Jz)``.
    """
    r = np.asarray(bloch, dtype=float)
    P = float(np.linalg.norm(r))
    n = r / P if P > 0 else np.array([1.0, 0.0, 0.0])
    p = 0.5 * (1.0 + P)
    out = []
    for j in block_spins(M):
        Jx, Jy, Jz = spin_matrices(j)
        x, V = np.linalg.eigh(n[0] * Jx + n[1] * Jy + n[2] * Jz)
        x = np.round(2 * x) / 2  # exact half-integers, so a = 0 or b = 0 is detected
        a, b = M / 2 + x, M / 2 - x
        with np.errstate(divide="ignore"):
            logw = (log_multiplicity(M, j)
                    + np.where(a > 0, a * np.log(p) if p > 0 else -np.inf, 0.0)
                    + np.where(b > 0, b * np.log1p(-p) if p < 1 else -np.inf, 0.0))
        w = np.exp(logw)
        blk = (V * w) @ V.conj().T
        if phi0:
            u = np.exp(1j * phi0 * np.diag(Jz).real)
            blk = u[:, None] * blk * u.conj()[None, :]
        out.append(blk)
    return out


def dicke_to_blocks(psi: np.ndarray) -> list:
    """Symmetric pure state (Dicke amplitudes) as weighted blocks."""
    M = psi.shape[0] - 1
    lay = layout(M)
    out = [np.zeros((n, n), dtype=complex) for n in lay.sizes]
    out[0] = np.outer(psi, psi.conj())
    return out


def blocks_to_full(blocks, M: int) -> np.ndarray:
    """Expand weighted blocks into the ``2**M`` computational basis (small M).

    Builds each multiplicity copy from highest-weight vectors of the
    ``J^2`` eigenspaces so the result can be checked against full-space
    channels.  Qubit 0 is the most significant bit; bit 1 is spin down.
    """
    from .states import FULL_SPACE_MAX_M

    if M > FULL_SPACE_MAX_M:
        raise ValueError(f"blocks_to_full limited to M <= {FULL_SPACE_MAX_M}")
    basis = full_space_basis(M)
    dim = 2**M
    rho = np.zeros((dim, dim), dtype=complex)
    for b, j in enumerate(block_spins(M)):
        vecs = basis[b]  # (copies, 2j+1, dim)
        d = vecs.shape[0]
        for a in range(d):
            V = vecs[a]
            rho += V.T @ blocks[b] @ V.conj() / d
    return rho


@lru_cache(maxsize=8)
def full_space_basis(M: int):
    """Per block, an array ``(d_j, 2j+1, 2**M)`` of ``|j, m, alpha>`` vectors."""
    dim = 2**M
    bits = (np.arange(dim)[:, None] >> np.arange(M - 1, -1, -1)[None, :]) & 1
    mz = 0.5 * (M - 2 * bits.sum(axis=1))
    # collective operators in the computational basis
    Jp = np.zeros((dim, dim))
    for q in range(M):
        flip = 1 << (M - 1 - q)
        src = np.flatnonzero(bits[:, q] == 1)  # spin down -> up
        Jp[src ^ flip, src] += 1.0
    Jm = Jp.T
    Jz = np.diag(mz)
    J2 = Jm @ Jp + Jz @ Jz + Jz
    out = []
    for j in block_spins(M):
        # highest weight: m = j and J+ annihilates
        sector = np.flatnonzero(np.isclose(mz, j))
        ev, U = np.linalg.eigh(J2[np.ix_(sector, sector)])
        hw = U[:, np.isclose(ev, j * (j + 1))]
        copies = []
        for a in range(hw.shape[1]):
            v = np.zeros(dim)
            v[sector] = hw[:, a]
            ladder = [v]
            for m in j - np.arange(1, int(round(2 * j)) + 1):
                w = Jm @ ladder[-1]
                ladder.append(w / np.linalg.norm(w))
            copies.append(np.array(ladder))
        out.append(np.array(copies).reshape(len(copies), int(round(2 * j)) + 1, dim))
    return out
