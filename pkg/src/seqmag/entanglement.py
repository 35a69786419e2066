"""Logarithmic negativity of symmetric pure states across spin bipartitions."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
import math

import numpy as np

from .fisher import default_threads
from .protocol import ProtocolParams, checkpoints_pow2, run_trajectory
from .states import DickeVector, bipartite_expand

# Schmidt coefficients below this count as zero (product state)
SCHMIDT_TOL = 1e-10


@dataclass(frozen=True)
class Bipartition:
    """Split of ``M1 + M2`` spins into two parties of at least one spin each."""

    M1: int
    M2: int

    def __post_init__(self):
        if int(self.M1) < 1 or int(self.M2) < 1:
            raise ValueError(f"both parties need at least one spin, got ({self.M1}, {self.M2})")

    @property
    def M(self) -> int:
        return self.M1 + self.M2

    @property
    def tag(self) -> str:
        return f"{self.M1}|{self.M2}"

    @classmethod
    def single(cls, M: int) -> Bipartition:
        """One spin against the remaining ``M - 1``."""
        return cls(1, M - 1)

    @classmethod
    def equal(cls, M: int) -> Bipartition:
        """``(ceil(M/2), floor(M/2))``."""
        return cls((M + 1) // 2, M // 2)

    @classmethod
    def parse(cls, text: str) -> Bipartition:
        a, b = text.split("|")
        return cls(int(a), int(b))


def _check(state: DickeVector, split: Bipartition):
    if split.M != state.M:
        raise ValueError(f"split {split.tag} does not partition M={state.M}")


def schmidt_coefficients(state: DickeVector, split: Bipartition) -> np.ndarray:
    """Schmidt coefficients (descending) of ``state`` across ``split``."""
    _check(state, split)
    return np.linalg.svd(bipartite_expand(state, split.M1, split.M2), compute_uv=False)


def log_negativity(state: DickeVector, split: Bipartition) -> float:
    """``2 log2(sum_i alpha_i)`` in ebits; zero for product states."""
    alpha = schmidt_coefficients(state, split)
    alpha = alpha / np.linalg.norm(alpha)
    if alpha.size < 2 or alpha[1] <= SCHMIDT_TOL:
        return 0.0
    return max(0.0, 2.0 * math.log2(float(alpha.sum())))


@dataclass(frozen=True)
class EntanglementTrace:
    """Mean and standard error of LN per split (rows) and checkpoint (columns)."""

    checkpoints: np.ndarray
    splits: tuple
    mean_LN: np.ndarray
    std_error: np.ndarray
    runs: int

    def half_rise(self, split_index: int = 0, plateau_N: int | None = None) -> float:
        """First ``N`` (log-interpolated) where the mean reaches half its plateau.

        The plateau is the mean LN at ``plateau_N`` (default: last checkpoint).
        """
        y = self.mean_LN[split_index]
        N = self.checkpoints
        top = y[-1] if plateau_N is None else y[np.flatnonzero(N == plateau_N)[0]]
        half = 0.5 * top
        i = int(np.argmax(y >= half))
        if i == 0:
            return float(N[0])
        x0, x1 = math.log(max(N[i - 1], 1)), math.log(N[i])
        t = (half - y[i - 1]) / (y[i] - y[i - 1])
        return float(math.exp(x0 + t * (x1 - x0)))


def default_splits(M: int) -> list:
    """One spin versus the rest and the equal split (deduplicated)."""
    out = [Bipartition.single(M)]
    eq = Bipartition.equal(M)
    if eq != out[0]:
        out.append(eq)
    return out


def entanglement_trace(
    params: ProtocolParams,
    splits=None,
    runs: int = 32,
    base_seed: int = 0,
    checkpoints=None,
    threads: int | None = None,
    backend: str | None = None,
) -> EntanglementTrace:
    """Average LN of the trajectory state at ``checkpoints`` over ``runs`` seeds.

    Only pure states of one uniform, fully polarized group are supported.
    """
    if params.gamma2 > 0:
        raise ValueError("entanglement_trace needs gamma2 = 0 (pure-state negativity)")
    spec = params.resolved_ensemble()
    if len(spec.groups) != 1 or spec.groups[0].polarization < 1.0 - 1e-12:
        raise ValueError("entanglement_trace needs a single fully polarized group")
    M = params.M
    if M < 2:
        raise ValueError("entanglement needs M >= 2")
    splits = default_splits(M) if splits is None else [s if isinstance(s, Bipartition) else Bipartition(*s)
                                                        for s in splits]
    for s in splits:
        if s.M != M:
            raise ValueError(f"split {s.tag} does not partition M={M}")
    if runs < 2:
        raise ValueError("runs must be >= 2")
    cps = checkpoints_pow2(params.N_max, include_zero=True) if checkpoints is None \
        else np.asarray(checkpoints, dtype=np.int64)
    threads = default_threads() if threads is None else int(threads)

    def one(seed):
        rec = run_trajectory(params, seed, cps, siblings=False, snapshots=True, engine="pure",
                             backend=backend)
        out = np.empty((len(splits), cps.size))
        for c, psi in enumerate(rec.snapshots):
            v = DickeVector(M, psi / np.linalg.norm(psi))
            for s, split in enumerate(splits):
                out[s, c] = log_negativity(v, split)
        return out

    seeds = [int(base_seed) + i for i in range(runs)]
    if threads == 1:
        vals = [one(s) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            vals = list(ex.map(one, seeds))
    vals = np.stack(vals)
    return EntanglementTrace(cps, tuple(splits), vals.mean(axis=0),
                             vals.std(axis=0, ddof=1) / math.sqrt(runs), runs)
