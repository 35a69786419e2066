"""Monte Carlo Fisher information of the full measurement record.

For every sampled record ``X`` the engine returns ``ln p_X`` at ``phi`` and
``phi +- d_phi``; the central difference gives the score ``d ln p_X / d phi``
and ``E[score**2]`` over records is the Fisher information.  Results are in
detuning units (multiplied by ``tau_m**2``).

Two per-run estimators are offered:

``"score"``
    squared finite-difference score of the whole record (unbiased, but the
    per-run spread is of the order of the mean itself).
``"conditional"``
    sum over steps of the one-step Fisher information given the past
    outcomes, ``sum_x (dq_x)**2 / q_x``.  Its expectation is the same record
    Fisher information (the score is a martingale whose increments are
    orthogonal), but it averages out the outcome noise at every step and so
    has a much smaller variance at large N.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
import math
import os
from typing import NamedTuple

import numpy as np

from .protocol import ProtocolParams, TrajectoryUnderflow, checkpoints_pow2, run_trajectory

ESTIMATORS = ("score", "conditional")


def default_threads() -> int:
    env = os.environ.get("SEQMAG_THREADS")
    if env:
        n = int(env)
        if n < 1:
            raise ValueError("SEQMAG_THREADS must be a positive integer")
        return n
    try:
        return max(1, len(os.sched_getaffinity(0)))
    except AttributeError:  # pragma: no cover - non-Linux
        return os.cpu_count() or 1


@dataclass(frozen=True)
class FisherEstimate:
    """Per-checkpoint mean and standard error of the record Fisher information.

    ``per_run`` keeps the individual run values (rows ordered by seed) so
    fits can bootstrap over runs; ``aborted`` lists seeds lost to underflow.
    """

    checkpoints: np.ndarray
    mean_FI: np.ndarray
    std_error: np.ndarray
    runs: int
    d_phi_used: float
    estimator: str = "score"
    per_run: np.ndarray | None = field(default=None, repr=False)
    aborted: tuple = ()

    def __post_init__(self):
        if self.runs < 2:
            raise ValueError("a Fisher estimate needs at least 2 runs")
        if np.any(np.asarray(self.mean_FI) < 0) or np.any(np.asarray(self.std_error) < 0):
            raise ValueError("mean_FI and std_error must be non-negative")

    @classmethod
    def from_runs(cls, checkpoints, values, d_phi, estimator="score", aborted=()):
        values = np.asarray(values, dtype=float)
        n = values.shape[0]
        if n < 2:
            raise ValueError(f"need at least 2 surviving runs, got {n}")
        mean = values.mean(axis=0)
        se = values.std(axis=0, ddof=1) / math.sqrt(n)
        return cls(np.asarray(checkpoints), mean, se, n, d_phi, estimator, values, tuple(aborted))

    def at(self, N: int) -> tuple:
        """``(mean, std_error)`` at checkpoint ``N``."""
        idx = np.flatnonzero(self.checkpoints == N)
        if idx.size == 0:
            raise KeyError(f"N={N} is not a checkpoint")
        return float(self.mean_FI[idx[0]]), float(self.std_error[idx[0]])


def _run_values(params, seed, cps, backend, engine="auto"):
    rec = run_trajectory(params, seed, cps, engine=engine, backend=backend)
    t2 = params.tau_m**2
    return np.stack([rec.score**2 * t2, rec.cond_fisher * t2])


def estimate_fisher(
    params: ProtocolParams,
    runs: int = 96,
    base_seed: int = 0,
    checkpoints=None,
    estimator: str = "score",
    threads: int | None = None,
    backend: str | None = None,
    engine: str = "auto",
) -> FisherEstimate:
    """Average the record Fisher information over ``runs`` trajectories.

    Run ``i`` uses seed ``base_seed + i``.  Runs that abort on probability
    underflow are dropped and listed in ``aborted``; fewer than two
    survivors raise :class:`TrajectoryUnderflow`.  Trajectories run on a
    thread pool (the compiled kernels release the GIL); the reduction is
    always over the seed-ordered results, so the output does not depend on
    the thread count.
    """
    if estimator not in ESTIMATORS:
        raise ValueError(f"estimator must be one of {ESTIMATORS}, got {estimator!r}")
    return estimate_fisher_all(params, runs, base_seed, checkpoints, threads, backend, engine)[estimator]


def estimate_fisher_all(
    params: ProtocolParams,
    runs: int = 96,
    base_seed: int = 0,
    checkpoints=None,
    threads: int | None = None,
    backend: str | None = None,
    engine: str = "auto",
) -> dict:
    """Both estimators from one set of trajectories, keyed by name."""
    if runs < 2:
        raise ValueError("runs must be >= 2")
    cps = checkpoints_pow2(params.N_max) if checkpoints is None else np.asarray(checkpoints, dtype=np.int64)
    threads = default_threads() if threads is None else int(threads)
    seeds = [int(base_seed) + i for i in range(runs)]

    def one(seed):
        try:
            return _run_values(params, seed, cps, backend, engine)
        except TrajectoryUnderflow:
            return None

    if threads == 1:
        results = [one(s) for s in seeds]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(one, seeds))
    aborted = tuple(s for s, r in zip(seeds, results) if r is None)
    values = [r for r in results if r is not None]
    if len(values) < 2:
        raise TrajectoryUnderflow(f"only {len(values)} of {runs} runs survived (aborted seeds {aborted})")
    values = np.stack(values)
    return {name: FisherEstimate.from_runs(cps, values[:, i], params.d_phi_used, name, aborted)
            for i, name in enumerate(ESTIMATORS)}


class ScalingFit(NamedTuple):
    """Log-log slope and the half-width of its 95% bootstrap interval."""

    exponent: float
    ci: float


def _slope(x, y):
    return float(np.polyfit(x, y, 1)[0])


def fit_power_law(x, y, n_boot: int = 1000, seed: int = 0, samples=None) -> ScalingFit:
    """Least-squares slope of ``log y`` against ``log x``.

    ``samples`` (runs x points), if given, is resampled over runs for the
    bootstrap; otherwise residuals of the fit are resampled.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.size < 5:
        raise ValueError(f"need at least 5 points for a scaling fit, got {x.size}")
    if np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("scaling fit needs strictly positive data")
    lx, ly = np.log(x), np.log(y)
    k = _slope(lx, ly)
    rng = np.random.default_rng(seed)
    boots = []
    if samples is not None:
        samples = np.asarray(samples, dtype=float)
        n = samples.shape[0]
        for _ in range(n_boot):
            m = samples[rng.integers(0, n, n)].mean(axis=0)
            if np.all(m > 0):
                boots.append(_slope(lx, np.log(m)))
    else:
        a, b = np.polyfit(lx, ly, 1)
        resid = ly - (a * lx + b)
        for _ in range(n_boot):
            boots.append(_slope(lx, a * lx + b + rng.choice(resid, resid.size)))
    if boots:
        lo, hi = np.percentile(boots, [2.5, 97.5])
        ci = 0.5 * float(hi - lo)
    else:
        ci = float("inf")
    return ScalingFit(k, ci)


def fit_scaling_exponent(estimate: FisherEstimate, window, n_boot: int = 1000, seed: int = 0) -> ScalingFit:
    """Power-law exponent of ``mean_FI`` over checkpoints in ``[N_lo, N_hi]``."""
    lo, hi = window
    if not lo < hi:
        raise ValueError(f"degenerate window {window}")
    sel = (estimate.checkpoints >= lo) & (estimate.checkpoints <= hi)
    if sel.sum() < 5:
        raise ValueError(f"window {window} holds {int(sel.sum())} checkpoints; need >= 5")
    samples = None if estimate.per_run is None else estimate.per_run[:, sel]
    return fit_power_law(estimate.checkpoints[sel], estimate.mean_FI[sel], n_boot, seed, samples)


def d_phi_convergence(params: ProtocolParams, runs: int = 16, base_seed: int = 0, checkpoints=None,
                      estimator: str = "score", threads: int | None = None):
    """Relative change of the Fisher estimate when ``d_phi`` is halved.

    Both estimates use the same seeds, so the records are identical and the
    comparison isolates the finite-difference bias.  Returns
    ``(estimate, estimate_half, max_rel_change)`` over checkpoints with
    non-zero information.
    """
    h = params.d_phi_used
    a = estimate_fisher(params.with_(d_phi=h), runs, base_seed, checkpoints, estimator, threads)
    b = estimate_fisher(params.with_(d_phi=h / 2), runs, base_seed, checkpoints, estimator, threads)
    nz = a.mean_FI > 0
    rel = float(np.max(np.abs(b.mean_FI[nz] / a.mean_FI[nz] - 1.0))) if nz.any() else 0.0
    return a, b, rel
