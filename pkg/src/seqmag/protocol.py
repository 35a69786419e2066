"""Sequential weak-measurement protocol on a collectively precessing register.

Each cycle the auxiliary spins precess by ``phi`` about z, then the sensor
qubit is weakly entangled with them and read out; the binary outcome selects
one of two Kraus operators

    U_pm = (exp(-2i beta Jx) +- exp(-i alpha) exp(+2i beta Jx)) / 2

(``alpha = pi/2`` is the usual Y-basis readout, which gives the familiar
``(e^{-i beta S} -+ i e^{+i beta S}) / 2`` with ``S = 2 Jx``).

Trajectories are simulated in a rotated basis where ``Jx`` is diagonal and
the precession is a real orthogonal matrix.  Up to a global phase both Kraus
operators are then real diagonal,

    U_+ ~ cos(2 beta x - alpha/2),    U_- ~ sin(2 beta x - alpha/2),

so the inner loop needs nothing but real matrix-vector products.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import lru_cache
import math

import numpy as np
import scipy.linalg as la

from . import permutational as perm
from .kernels import get_backend
from .states import (
    DickeVector,
    GroupedState,
    SpinEnsembleSpec,
    collective_operators,
    jz_values,
)

SEGMENT = 1 << 16
ENGINES = ("pure", "local", "collective")


class TrajectoryUnderflow(RuntimeError):
    """A realized outcome had vanishing probability under a tracked state."""


def default_d_phi(phi: float, N_max: int) -> float:
    """Finite-difference half-step used for the record-likelihood derivative.

    The log-likelihood of an ``N``-step record varies on a phase scale of
    roughly ``1/N``, so the step is capped well below that as well as below
    ``1e-3 * phi``.
    """
    return min(1e-3 * max(abs(phi), 0.01), 1e-3 / max(int(N_max), 1))


@dataclass(frozen=True)
class ProtocolParams:
    """Physical and numerical knobs of one protocol instance.

    Attributes
    ----------
    M : int
        Number of auxiliary spins.
    beta : float
        Effective coupling per measurement, ``2 k0 Ts / pi`` (radians).
    phi : float
        Precession phase per cycle, ``delta * tau_m`` (radians).
    tau_m : float
        Time between measurements (s); converts phase to detuning units.
    gamma2 : float
        Per-step transverse decay of each auxiliary spin (``tau_m / T2``).
    polarization : float
        Initial polarization along +x; below one the initial state is mixed.
    alpha : float
        Sensor readout-basis angle (``pi/2`` = Y basis).
    N_max : int
        Total number of measurements.
    d_phi : float or None
        Finite-difference half-step; ``None`` picks :func:`default_d_phi`.
    ensemble : SpinEnsembleSpec or None
        Grouped couplings/initial states; ``None`` means one uniform group.
    """

    M: int
    beta: float
    phi: float
    tau_m: float = 1.0
    gamma2: float = 0.0
    polarization: float = 1.0
    alpha: float = math.pi / 2
    N_max: int = 1024
    d_phi: float | None = None
    ensemble: SpinEnsembleSpec | None = None

    def __post_init__(self):
        if int(self.M) < 1:
            raise ValueError(f"M must be a positive integer, got {self.M}")
        if not 0.0 <= self.beta <= math.pi / 4 + 1e-15:
            raise ValueError(f"beta must lie in [0, pi/4], got {self.beta}")
        if self.gamma2 < 0:
            raise ValueError(f"gamma2 must be non-negative, got {self.gamma2}")
        if not 0.0 <= self.polarization <= 1.0:
            raise ValueError(f"polarization must lie in [0, 1], got {self.polarization}")
        if self.tau_m <= 0:
            raise ValueError(f"tau_m must be positive, got {self.tau_m}")
        if int(self.N_max) < 1:
            raise ValueError(f"N_max must be >= 1, got {self.N_max}")
        if self.d_phi is not None and self.d_phi <= 0:
            raise ValueError(f"d_phi must be positive, got {self.d_phi}")
        if self.ensemble is not None and self.ensemble.M != self.M:
            raise ValueError("ensemble.M does not match M")
        object.__setattr__(self, "M", int(self.M))
        object.__setattr__(self, "N_max", int(self.N_max))

    @classmethod
    def from_k0Ts(cls, k0Ts: float, **kwargs) -> ProtocolParams:
        return cls(beta=2.0 * k0Ts / math.pi, **kwargs)

    @property
    def k0Ts(self) -> float:
        return self.beta * math.pi / 2.0

    @property
    def d_phi_used(self) -> float:
        return self.d_phi if self.d_phi is not None else default_d_phi(self.phi, self.N_max)

    def resolved_ensemble(self) -> SpinEnsembleSpec:
        if self.ensemble is not None:
            return self.ensemble
        return SpinEnsembleSpec.uniform(self.M, self.polarization, self.beta)

    def with_(self, **changes) -> ProtocolParams:
        return replace(self, **changes)


def effective_beta(A_perp: float, Ts: float) -> float:
    """Per-measurement entangling angle ``2 A_perp Ts / pi``."""
    if A_perp <= 0 or Ts <= 0:
        raise ValueError("A_perp and Ts must be positive")
    return 2.0 * A_perp * Ts / math.pi


@dataclass(frozen=True)
class KrausPair:
    """Conditional evolutions for sensor outcomes + and - (``Jz`` basis)."""

    plus: np.ndarray = field(repr=False)
    minus: np.ndarray = field(repr=False)
    alpha: float = math.pi / 2

    def __iter__(self):
        yield self.plus
        yield self.minus

    def branches(self):
        """The two unitary branches ``(exp(-2i beta Jx), exp(+2i beta Jx))``."""
        a = self.plus + self.minus
        b = (self.plus - self.minus) * np.exp(1j * self.alpha)
        return a, b


@lru_cache(maxsize=256)
def _jx_eig(M: int):
    Jx = collective_operators(M)[0].real
    x, W = np.linalg.eigh(Jx)
    return x, W


def entangling_kraus(M: int, beta: float, alpha: float = math.pi / 2) -> KrausPair:
    """Kraus pair ``U_pm = (e^{-2i beta Jx} +- e^{-i alpha} e^{2i beta Jx}) / 2``."""
    x, W = _jx_eig(int(M))
    a = (W * np.exp(-2j * beta * x)) @ W.T
    b = (W * np.exp(2j * beta * x)) @ W.T
    phase = np.exp(-1j * alpha)
    return KrausPair((a + phase * b) / 2, (a - phase * b) / 2, alpha)


def free_evolution(M: int, phi: float) -> np.ndarray:
    """Collective precession ``exp(-i phi Jz)`` as a diagonal matrix."""
    return np.diag(np.exp(-1j * phi * jz_values(int(M))))


def _check_norm(norm2: float):
    if abs(norm2 - 1.0) > 1e-8:
        raise ValueError(f"state norm drifted: |psi|^2 = {norm2:.12g}")


def measure_probability(state, kraus) -> float:
    """Probability of the ``+`` outcome, ``<psi| U_+^dag U_+ |psi>``.

    ``state`` is a :class:`DickeVector` (``kraus`` a :class:`KrausPair` or the
    bare ``U_+`` matrix) or a :class:`GroupedState` (``kraus`` a sequence of
    per-group :class:`KrausPair`).  For grouped states each group's two
    unitary branches are applied separately and the products recombined
    coherently before squaring.
    """
    if isinstance(state, DickeVector):
        psi = state.amplitudes
        _check_norm(float(np.vdot(psi, psi).real))
        U = kraus.plus if isinstance(kraus, KrausPair) else np.asarray(kraus)
        p = float(np.linalg.norm(U @ psi) ** 2)
    elif isinstance(state, GroupedState):
        kraus = list(kraus)
        if len(kraus) != len(state.groups):
            raise ValueError("need one KrausPair per group")
        alpha = kraus[0].alpha
        overlap = 1.0 + 0.0j
        for g, kp in zip(state.groups, kraus):
            _check_norm(g.norm**2)
            if not math.isclose(kp.alpha, alpha):
                raise ValueError("all groups must share the readout angle")
            a, b = kp.branches()
            overlap *= np.vdot(a @ g.amplitudes, b @ g.amplitudes)
        p = 0.5 + 0.5 * float((np.exp(-1j * alpha) * overlap).real)
    else:
        raise TypeError(f"unsupported state type {type(state).__name__}")
    return min(max(p, 0.0), 1.0)


def dephase(state, gamma2: float, rng):
    """Random collective z-rotation with angle variance ``2 * gamma2``.

    Averaged over the angle, every single-spin coherence shrinks by
    ``exp(-gamma2)``.  The same angle is applied to all groups.
    """
    if gamma2 < 0:
        raise ValueError(f"gamma2 must be non-negative, got {gamma2}")
    if gamma2 == 0:
        return state
    theta = rng.normal(0.0, math.sqrt(2.0 * gamma2))
    if isinstance(state, DickeVector):
        return DickeVector(state.M, state.amplitudes * np.exp(-1j * theta * jz_values(state.M)))
    if isinstance(state, GroupedState):
        return GroupedState(tuple(dephase_fixed(g, theta) for g in state.groups))
    raise TypeError(f"unsupported state type {type(state).__name__}")


def dephase_fixed(state: DickeVector, theta: float) -> DickeVector:
    return DickeVector(state.M, state.amplitudes * np.exp(-1j * theta * jz_values(state.M)))


def _group_beta(grp, default_beta):
    return default_beta if grp.beta is None else grp.beta


def _group_states(spec: SpinEnsembleSpec, rng, default_beta):
    """Draw pure per-group initial states; returns ``[(DickeVector, beta), ...]``."""
    out = []
    for grp in spec.groups:
        beta = _group_beta(grp, default_beta)
        P = grp.polarization
        if P == 0.0:
            # direction is irrelevant for an unpolarized group
            n = np.array([1.0, 0.0, 0.0])
        else:
            n = np.asarray(grp.initial_bloch) / P
        if math.isclose(P, 1.0, abs_tol=1e-12):
            parts = [(grp.size, n)]
        else:
            n_up = int(rng.binomial(grp.size, 0.5 * (1.0 + P)))
            parts = [(n_up, n), (grp.size - n_up, -n)]
        for size, direction in parts:
            if size == 0:
                continue
            psi = DickeVector.coherent(size, direction)
            if grp.phi0:
                psi = dephase_fixed(psi, -grp.phi0)
            out.append((psi, beta))
    return out


def sample_mixed_initial(spec: SpinEnsembleSpec, rng) -> GroupedState:
    """Sample a pure product configuration from a partially polarized ensemble.

    Every spin of a group with Bloch vector ``P n`` independently points along
    ``+n`` with probability ``(1 + P)/2`` and along ``-n`` otherwise; spins
    sharing a direction form one permutation-symmetric group.
    """
    return GroupedState(tuple(psi for psi, _ in _group_states(spec, rng, None)))


# --- trajectory engine ----------------------------------------------------


@lru_cache(maxsize=256)
def _cyclic_basis(M: int):
    """Basis in which ``Jx -> Jz`` and ``Jz -> Jy`` (a 120 degree rotation).

    Returns ``(B, Qy, my)``: ``B`` maps cyclic-basis amplitudes to ``Jz``-basis
    amplitudes, and ``Jy = Qy diag(my) Qy^dag`` in the standard basis.
    """
    Jx, Jy, Jz = collective_operators(M)
    axis = (Jx + Jy + Jz) / math.sqrt(3.0)
    B = la.expm(-2j * math.pi / 3 * axis)
    my, Qy = np.linalg.eigh(Jy)
    return B, Qy, my


@lru_cache(maxsize=1024)
def _rotation_cyclic(M: int, phi: float) -> np.ndarray:
    # exp(-i phi Jz) in the cyclic basis is exp(-i phi Jy), a real rotation
    _, Qy, my = _cyclic_basis(M)
    V = ((Qy * np.exp(-1j * phi * my)) @ Qy.conj().T).real
    V.setflags(write=False)
    return V


def _kron_all(mats):
    out = np.ones((1, 1)) if mats[0].ndim == 2 else np.ones(1)
    for m in mats:
        out = np.kron(out, m)
    return out


def _joint_sum(vectors):
    """Flattened outer sum ``v1[k1] + v2[k2] + ...`` in kron order."""
    out = np.zeros(1)
    for v in vectors:
        out = (out[:, None] + v[None, :]).ravel()
    return out


def _coupling_phase(groups):
    """``sum_g 2 beta_g x_g`` over the joint Jx eigenbasis (descending x)."""
    return _joint_sum([2.0 * beta * jz_values(psi.M) for psi, beta in groups])


def _real_up_to_phase(psi):
    k = int(np.argmax(np.abs(psi)))
    psi = psi * np.exp(-1j * np.angle(psi[k]))
    if np.max(np.abs(psi.imag)) < 1e-14:
        psi = psi.real.astype(complex)
    return psi


def checkpoints_pow2(N_max: int, per_octave: int = 1, include_zero: bool = False) -> np.ndarray:
    """Measurement counts ``2**(i/per_octave)`` up to ``N_max`` (always included)."""
    N_max = int(N_max)
    top = math.log2(N_max) if N_max > 0 else 0
    pts = {int(round(2 ** (i / per_octave))) for i in range(int(math.floor(top * per_octave)) + 1)}
    pts.add(N_max)
    if include_zero:
        pts.add(0)
    return np.array(sorted(p for p in pts if p <= N_max), dtype=np.int64)


@dataclass
class TrajectoryRecord:
    """One sampled measurement record plus likelihood bookkeeping.

    ``logp_*`` are log-likelihoods of the realized record under phase
    ``phi`` and ``phi +- d_phi``, sampled at ``checkpoints``.  The sibling
    values are stored as differences from the center one (``dlog_plus``,
    ``dlog_minus``) because the raw values are ~``-N ln 2`` and their
    difference would otherwise be lost to cancellation.
    """

    seed: int
    N: int
    checkpoints: np.ndarray
    logp_center: np.ndarray
    dlog_plus: np.ndarray
    dlog_minus: np.ndarray
    cond_fisher: np.ndarray
    d_phi: float
    outcome_bits: np.ndarray = field(repr=False)
    probs: np.ndarray | None = field(default=None, repr=False)
    snapshots: list | None = field(default=None, repr=False)

    @property
    def outcomes(self) -> np.ndarray:
        """Outcome per step, 0 for ``+`` and 1 for ``-``."""
        return np.unpackbits(self.outcome_bits, count=self.N)

    @property
    def logp_plus(self) -> np.ndarray:
        return self.logp_center + self.dlog_plus

    @property
    def logp_minus(self) -> np.ndarray:
        return self.logp_center + self.dlog_minus

    @property
    def score(self) -> np.ndarray:
        """Central-difference estimate of d ln p(record) / d phi per checkpoint."""
        return (self.dlog_plus - self.dlog_minus) / (2.0 * self.d_phi)


def _local_supported(params: ProtocolParams) -> bool:
    groups = params.resolved_ensemble().groups
    return len(groups) == 1 and groups[0].beta in (None, params.beta)


def _prepare_local(params: ProtocolParams, phis):
    """Packed spin-j blocks for independent per-spin dephasing."""
    M = params.M
    grp = params.resolved_ensemble().groups[0]
    lay = perm.layout(M)
    gp, gm = [], []
    for j in lay.js:
        x, W = np.linalg.eigh(perm.spin_matrices(j)[0].real)
        theta = 2.0 * params.beta * x - params.alpha / 2.0
        gp.append((W * np.cos(theta)) @ W.T)
        gm.append((W * np.sin(theta)) @ W.T)
    m, mp = lay.m_values()
    F = np.stack([np.exp(-1j * ph * (m - mp)) for ph in phis])
    if params.gamma2 > 0:
        D = perm.dephasing_channel(M, float(params.gamma2))
    else:
        D = (np.zeros(0), np.zeros(0, dtype=np.intp), np.zeros(lay.length + 1, dtype=np.intp))
    state = lay.pack(perm.product_state_blocks(M, grp.initial_bloch, grp.phi0))
    return [], dict(D=D, F=np.ascontiguousarray(F), G_plus=lay.pack(gp), G_minus=lay.pack(gm),
                    sizes=lay.sizes, offsets=lay.offsets, state=state.astype(complex), layout=lay)


def _prepare(params: ProtocolParams, rng, engine: str):
    h = params.d_phi_used
    phis = (params.phi, params.phi + h, params.phi - h)
    if engine == "local":
        return _prepare_local(params, phis)
    groups = _group_states(params.resolved_ensemble(), rng, params.beta)
    theta = _coupling_phase(groups) - params.alpha / 2.0
    g_plus, g_minus = np.cos(theta), np.sin(theta)
    sizes = [psi.M for psi, _ in groups]
    if engine == "pure":
        VT = np.stack(
            [_kron_all([_rotation_cyclic(m, ph) for m in sizes]).T for ph in phis]
        )
        psi = _kron_all([_cyclic_basis(p.M)[0].conj().T @ p.amplitudes for p, _ in groups])
        return groups, dict(VT=np.ascontiguousarray(VT), g_plus=g_plus, g_minus=g_minus,
                            state=_real_up_to_phase(psi))
    m_tot = _joint_sum([jz_values(m) for m in sizes])
    dm = m_tot[:, None] - m_tot[None, :]
    decay = np.exp(-params.gamma2 * dm**2)
    F = np.stack([np.exp(-1j * ph * dm) * decay for ph in phis])
    # _jx_eig sorts x ascending; the coupling phase above is in descending order
    W = _kron_all([_jx_eig(m)[1][:, ::-1] for m in sizes])
    G_plus = (W * g_plus) @ W.T
    G_minus = (W * g_minus) @ W.T
    psi = _kron_all([p.amplitudes for p, _ in groups])
    rho = np.outer(psi, psi.conj())
    return groups, dict(F=np.ascontiguousarray(F), G_plus=np.ascontiguousarray(G_plus),
                        G_minus=np.ascontiguousarray(G_minus), state=rho)


def _to_jz(state, groups, engine, prep):
    if engine == "local":
        return [np.array(b) for b in prep["layout"].unpack(state)]
    sizes = [psi.M for psi, _ in groups]
    if engine == "pure":
        return _kron_all([_cyclic_basis(m)[0] for m in sizes]) @ state
    return state


def run_trajectory(
    params: ProtocolParams,
    seed: int,
    checkpoints=None,
    *,
    siblings: bool = True,
    record_probs: bool = False,
    snapshots: bool = False,
    engine: str = "auto",
    backend: str | None = None,
) -> TrajectoryRecord:
    """Sample one measurement record and track its likelihood.

    The record is generated by the state at ``phi``; two sibling states at
    ``phi +- d_phi`` are driven through the same outcome sequence so the
    record likelihood can be differentiated.  ``engine`` is one of

    ``"pure"``
        state vectors in the (grouped) symmetric subspace; needs
        ``gamma2 == 0``.  Partially polarized ensembles are sampled as pure
        product configurations (:func:`sample_mixed_initial`).
    ``"local"``
        permutation-invariant density matrices (all spin-j blocks) with
        independent dephasing of every spin and the exact mixed initial
        state; single uniform group only.
    ``"collective"``
        density matrices on the grouped symmetric subspace with the
        angle-averaged collective dephasing channel of :func:`dephase`.
    ``"auto"``
        ``"pure"`` for ``gamma2 == 0``, else ``"local"`` when supported and
        ``"collective"`` otherwise.

    Raises
    ------
    TrajectoryUnderflow
        If a realized outcome had probability below 1e-300 for a tracked state.
    """
    if engine == "auto":
        if params.gamma2 == 0:
            engine = "pure"
        else:
            engine = "local" if _local_supported(params) else "collective"
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}; expected one of {ENGINES}")
    if engine == "pure" and params.gamma2 > 0:
        raise ValueError("pure-state engine cannot represent gamma2 > 0")
    if engine == "local" and not _local_supported(params):
        raise ValueError("local engine needs a single group with the common coupling")
    N = params.N_max
    cps = checkpoints_pow2(N) if checkpoints is None else np.asarray(checkpoints, dtype=np.int64)
    if cps.size == 0 or np.any(np.diff(cps) <= 0) or cps[0] < 0 or cps[-1] > N:
        raise ValueError("checkpoints must be strictly increasing within [0, N_max]")

    kern = get_backend(backend)
    rng = np.random.default_rng(int(seed))
    groups, prep = _prepare(params, rng, engine)
    S = 3 if siblings else 1
    if engine == "pure":
        state = np.ascontiguousarray(np.repeat(prep["state"][None, :], S, axis=0))
        step = lambda u, o, p, a: kern.pure_segment(
            prep["VT"][:S], prep["g_plus"], prep["g_minus"], state, u, o, p, a)
    elif engine == "local":
        state = np.ascontiguousarray(np.repeat(prep["state"][None, :], S, axis=0))
        Dd, Di, Dp = prep["D"]
        step = lambda u, o, p, a: kern.block_segment(
            Dd, Di, Dp, prep["F"][:S], prep["G_plus"], prep["G_minus"],
            prep["sizes"], prep["offsets"], state, u, o, p, a)
    else:
        state = np.ascontiguousarray(np.repeat(prep["state"][None, :, :], S, axis=0))
        step = lambda u, o, p, a: kern.density_segment(
            prep["F"][:S], prep["G_plus"], prep["G_minus"], state, u, o, p, a)

    outcomes = np.zeros(N, dtype=np.uint8)
    probs = np.zeros(N) if record_probs else None
    scratch = np.zeros(min(N, SEGMENT))
    acc = np.zeros(4)
    rows = np.zeros((cps.size, 4))
    snaps = [] if snapshots else None
    done = 0
    for ci, target in enumerate(cps):
        while done < target:
            n = min(int(target) - done, SEGMENT)
            u = rng.random(n)
            pr = probs[done:done + n] if record_probs else scratch[:n]
            fail = step(u, outcomes[done:done + n], pr, acc)
            if fail >= 0:
                raise TrajectoryUnderflow(
                    f"seed {seed}: outcome probability underflow at step {done + fail + 1} "
                    f"(M={params.M}, beta={params.beta:.6g}, phi={params.phi:.6g})")
            done += n
        rows[ci] = acc
        if snapshots:
            snaps.append(_to_jz(state[0], groups, engine, prep))
    h = params.d_phi_used
    if all(_group_beta(g, params.beta) == 0 for g in params.resolved_ensemble().groups):
        # uncoupled spins: the record carries no detuning dependence, drop ulp-level noise
        rows[:, 1:] = 0.0
    return TrajectoryRecord(
        seed=int(seed), N=N, checkpoints=cps,
        logp_center=rows[:, 0].copy(), dlog_plus=rows[:, 1].copy(), dlog_minus=rows[:, 2].copy(),
        cond_fisher=rows[:, 3] / (4.0 * h * h), d_phi=h,
        outcome_bits=np.packbits(outcomes), probs=probs, snapshots=snaps,
    )


def record_log_likelihood(params: ProtocolParams, outcomes, engine: str = "auto",
                          backend: str | None = None) -> float:
    """``ln p(record)`` of a given outcome sequence (0 for ``+``, 1 for ``-``).

    Runs the trajectory kernels with the draws pinned so that the requested
    outcome is taken whenever it has non-zero probability; a record
    containing an impossible outcome returns ``-inf``.  Partially polarized
    ensembles need a density engine (``"auto"`` picks ``"local"``).
    """
    x = np.asarray(outcomes, dtype=np.uint8).ravel()
    if np.any(x > 1):
        raise ValueError("outcomes must be 0 or 1")
    mixed = any(g.polarization < 1.0 - 1e-12 for g in params.resolved_ensemble().groups)
    if engine == "auto":
        if params.gamma2 == 0 and not mixed:
            engine = "pure"
        else:
            engine = "local" if _local_supported(params) else "collective"
    if engine not in ENGINES:
        raise ValueError(f"unknown engine {engine!r}; expected one of {ENGINES}")
    if engine == "pure" and (params.gamma2 > 0 or mixed):
        raise ValueError("pure-state engine needs gamma2 = 0 and a fully polarized ensemble")
    kern = get_backend(backend)
    groups, prep = _prepare(params, np.random.default_rng(0), engine)
    state = np.ascontiguousarray(prep["state"][None, ...])
    acc = np.zeros(4)
    done = 0
    while done < x.size:
        n = min(x.size - done, SEGMENT)
        want = x[done:done + n]
        u = want.astype(float)  # 0 -> take "+" if p > 0; 1 -> always "-"
        got = np.zeros(n, dtype=np.uint8)
        pr = np.zeros(n)
        if engine == "pure":
            fail = kern.pure_segment(prep["VT"][:1], prep["g_plus"], prep["g_minus"], state, u, got, pr, acc)
        elif engine == "local":
            Dd, Di, Dp = prep["D"]
            fail = kern.block_segment(Dd, Di, Dp, prep["F"][:1], prep["G_plus"], prep["G_minus"],
                                      prep["sizes"], prep["offsets"], state, u, got, pr, acc)
        else:
            fail = kern.density_segment(prep["F"][:1], prep["G_plus"], prep["G_minus"], state, u, got, pr, acc)
        if fail >= 0 or np.any(got != want):
            return -math.inf
        done += n
    return float(acc[0])
