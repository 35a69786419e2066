"""Scenario presets, parameter sweeps and CSV output.

A preset fixes the kind of experiment and default parameters; overrides
replace any of them.  Every run uses seeds ``base_seed .. base_seed+runs-1``
so results are reproducible bit for bit and sweep blocks share their noise.
"""

from __future__ import annotations

from dataclasses import dataclass, field
import io
import logging
import math
import os

import numpy as np

from . import __version__
from .analytic import fisher_asymptote, fisher_closed_form, gamma_b, hl_fisher, total_decay
from .entanglement import Bipartition, default_splits, entanglement_trace
from .fisher import ESTIMATORS, estimate_fisher
from .protocol import ENGINES, ProtocolParams, checkpoints_pow2

log = logging.getLogger("seqmag")

COLUMNS = ("preset", "param_tag", "N", "M", "beta", "gamma2", "phi", "mean_FI", "std_err", "runs",
           "analytic_eq9", "analytic_eq14", "hl_fisher", "mean_LN", "LN_split")

SWEEPABLE = ("M", "beta", "gamma2", "phi", "N_max")


def _int(v):
    f = float(v)
    if f != int(f):
        raise ValueError(f"expected an integer, got {v!r}")
    return int(f)


def _list(conv):
    def parse(v):
        if isinstance(v, str):
            v = [x for x in v.replace(";", ",").split(",") if x.strip()]
        return [conv(x) for x in v]
    return parse


def _choice(options):
    def parse(v):
        v = str(v).strip()
        if v not in options:
            raise ValueError(f"expected one of {options}, got {v!r}")
        return v
    return parse


def _splits(v):
    if isinstance(v, str):
        v = [x for x in v.split(",") if x.strip()]
    return [x if isinstance(x, Bipartition) else Bipartition.parse(str(x).strip()) for x in v]


# key -> (parser, unit, description)
KEYS = {
    "M": (_int, "spins", "number of auxiliary spins"),
    "k0Ts": (float, "rad", "coupling times sensing time; beta = 2 k0Ts / pi"),
    "beta": (float, "rad", "effective coupling per measurement (overrides k0Ts)"),
    "phi": (float, "rad/step", "precession phase per measurement cycle"),
    "tau_m": (float, "s", "time per measurement cycle"),
    "gamma2": (float, "1/step", "per-spin transverse decay per cycle (tau_m / T2)"),
    "polarization": (float, "-", "initial polarization along +x, 0 = fully mixed"),
    "alpha": (float, "rad", "sensor readout-basis angle (pi/2 = Y basis)"),
    "N_max": (_int, "measurements", "measurements per trajectory"),
    "d_phi": (float, "rad", "finite-difference half-step (default automatic)"),
    "runs": (_int, "trajectories", "independent trajectories per data point"),
    "estimator": (_choice(ESTIMATORS), "-", "Fisher estimator per run"),
    "engine": (_choice(("auto",) + ENGINES), "-", "trajectory engine"),
    "per_octave": (_int, "1/octave", "checkpoints per factor 2 in N"),
    "M_values": (_list(_int), "spins", "comma-separated spin counts (fig2_M_sweep)"),
    "gamma2_values": (_list(float), "1/step", "comma-separated decay rates (figdec_gamma_sweep)"),
    "k0Ts_values": (_list(float), "rad", "comma-separated couplings (fig2si_ratio)"),
    "splits": (_splits, "spins", "bipartitions as a|b, comma-separated (fig3si_entanglement)"),
}

_FIG1 = dict(M=20, k0Ts=0.01, phi=0.7, tau_m=1.0, gamma2=0.0, polarization=1.0, N_max=2**20,
             runs=96, estimator="score", engine="auto", per_octave=1)

PRESETS = {
    "fig1_product": ("curve", dict(_FIG1)),
    "fig1_mixed": ("curve", dict(_FIG1, polarization=0.0, runs=32)),
    "fig1_strong_coupling": ("curve", dict(_FIG1, k0Ts=0.05)),
    "fig2_M_sweep": ("M_sweep", dict(_FIG1, M_values=[5, 10, 20, 40])),
    "figdec_gamma_sweep": ("gamma_sweep", dict(_FIG1, M=10, N_max=2**18, runs=16,
                                               gamma2_values=[1e-5, 3e-5, 1e-4, 3e-4, 1e-3])),
    "fig2si_ratio": ("ratio", dict(_FIG1, per_octave=4, k0Ts_values=[0.01, 0.05])),
    "fig3si_entanglement": ("entanglement", dict(_FIG1, M=10, N_max=2**16, runs=32)),
    "custom": ("curve", dict(_FIG1)),
}


def parse_value(key: str, value):
    """Convert ``value`` (string or native) for config ``key``."""
    if key not in KEYS:
        raise KeyError(key)
    try:
        return KEYS[key][0](value)
    except (TypeError, ValueError) as e:
        raise ValueError(f"invalid value for {key}: {value!r} ({e})") from None


@dataclass
class ExperimentConfig:
    """Preset name plus overrides, output path and base seed."""

    preset: str = "custom"
    overrides: dict = field(default_factory=dict)
    output_path: str | None = None
    base_seed: int = 0
    threads: int | None = None

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise ValueError(f"unknown preset {self.preset!r}; choose from {sorted(PRESETS)}")
        unknown = [k for k in self.overrides if k not in KEYS]
        if unknown:
            raise KeyError(f"unknown config key(s): {', '.join(unknown)}")
        if "beta" in self.overrides and "k0Ts" in self.overrides:
            raise ValueError("give either beta or k0Ts, not both")
        self.overrides = {k: parse_value(k, v) for k, v in self.overrides.items()}
        if not 0 <= int(self.base_seed) < 2**64:
            raise ValueError("base_seed must be a 64-bit unsigned integer")
        self.resolved()  # pre-flight validation of every parameter

    @property
    def kind(self) -> str:
        return PRESETS[self.preset][0]

    def resolved(self) -> dict:
        """Preset defaults merged with overrides; ``beta`` always present."""
        cfg = dict(PRESETS[self.preset][1])
        cfg.update(self.overrides)
        if "beta" in self.overrides:
            cfg["k0Ts"] = cfg["beta"] * math.pi / 2
        else:
            cfg["beta"] = 2 * cfg["k0Ts"] / math.pi
        # a scalar override of the swept quantity collapses the preset's list
        for scalar, lst in (("M", "M_values"), ("gamma2", "gamma2_values"), ("k0Ts", "k0Ts_values")):
            if lst in cfg and scalar in self.overrides and lst not in self.overrides:
                cfg[lst] = [cfg[scalar]]
        if "beta" in self.overrides and "k0Ts_values" in cfg and "k0Ts_values" not in self.overrides:
            cfg["k0Ts_values"] = [cfg["k0Ts"]]
        if cfg["runs"] < 2:
            raise ValueError("runs must be >= 2")
        if cfg["per_octave"] < 1:
            raise ValueError("per_octave must be >= 1")
        self._params(cfg)
        return cfg

    @staticmethod
    def _params(c) -> ProtocolParams:
        return ProtocolParams(M=c["M"], beta=c["beta"], phi=c["phi"], tau_m=c["tau_m"],
                              gamma2=c["gamma2"], polarization=c["polarization"],
                              alpha=c.get("alpha", math.pi / 2), N_max=c["N_max"], d_phi=c.get("d_phi"))

    def echo(self) -> list:
        cfg = self.resolved()
        items = []
        for k in sorted(cfg):
            v = cfg[k]
            if isinstance(v, list):
                v = ",".join(x.tag if isinstance(x, Bipartition) else _fmt(x) for x in v)
            elif isinstance(v, float):
                v = _fmt(v)
            items.append(f"{k}={v}")
        return items


def _fmt(x) -> str:
    if x is None or x == "":
        return ""
    if isinstance(x, (float, np.floating)):
        if not math.isfinite(x):
            raise ValueError(f"non-finite value {x} in result table")
        return repr(float(x))
    return str(x)


@dataclass
class ResultTable:
    """Rows keyed by :data:`COLUMNS` plus header and footer comment lines."""

    rows: list = field(default_factory=list)
    header: list = field(default_factory=list)
    footer: list = field(default_factory=list)
    aborted: int = 0

    def extend(self, other: ResultTable):
        self.rows.extend(other.rows)
        self.footer.extend(other.footer)
        self.aborted += other.aborted

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows])

    def to_csv(self) -> str:
        buf = io.StringIO()
        for line in self.header:
            buf.write(f"# {line}\n")
        buf.write(",".join(COLUMNS) + "\n")
        for r in self.rows:
            buf.write(",".join(_fmt(r.get(c, "")) for c in COLUMNS) + "\n")
        for line in self.footer:
            buf.write(f"# {line}\n")
        buf.write(f"# total_aborted_runs={self.aborted}\n")
        return buf.getvalue()

    def write(self, path):
        text = self.to_csv()
        try:
            d = os.path.dirname(os.path.abspath(path))
            os.makedirs(d, exist_ok=True)
            with open(path, "w", encoding="utf-8", newline="") as f:
                f.write(text)
        except OSError as e:
            raise OSError(f"cannot write result table to {path}: {e.strerror or e}") from e


def _fisher_block(preset, tag, params: ProtocolParams, cfg, base_seed, threads) -> ResultTable:
    cps = checkpoints_pow2(params.N_max, cfg["per_octave"])
    est = _estimate(params, cfg, base_seed, threads, cps)
    k0Ts = params.k0Ts
    eq9 = fisher_closed_form(cps, params.M, k0Ts, params.tau_m, total_decay(params.beta, params.gamma2))
    eq14, _ = fisher_asymptote(cps, params.M, k0Ts, params.tau_m, gamma_b(k0Ts), params.gamma2) \
        if gamma_b(k0Ts) + params.gamma2 > 0 else (np.full(cps.size, np.nan), None)
    hl = hl_fisher(params.M, cps, params.tau_m)
    rows = []
    for i, N in enumerate(cps):
        rows.append(dict(preset=preset, param_tag=tag, N=int(N), M=params.M, beta=params.beta,
                         gamma2=params.gamma2, phi=params.phi, mean_FI=est.mean_FI[i],
                         std_err=est.std_error[i], runs=est.runs, analytic_eq9=eq9[i],
                         analytic_eq14=eq14[i] if np.isfinite(eq14[i]) else "", hl_fisher=hl[i]))
    footer = [f"block {tag}: aborted_runs={len(est.aborted)}"
              + (f" seeds={','.join(map(str, est.aborted))}" if est.aborted else "")]
    return ResultTable(rows, [], footer, len(est.aborted))


def _estimate(params, cfg, base_seed, threads, cps):
    return estimate_fisher(params, cfg["runs"], base_seed, cps, cfg["estimator"], threads,
                           engine=cfg["engine"])


def _entanglement_block(preset, tag, params, cfg, base_seed, threads) -> ResultTable:
    splits = cfg.get("splits") or default_splits(params.M)
    cps = checkpoints_pow2(params.N_max, cfg["per_octave"], include_zero=True)
    tr = entanglement_trace(params, splits, cfg["runs"], base_seed, cps, threads)
    rows = []
    for s, split in enumerate(tr.splits):
        for i, N in enumerate(cps):
            rows.append(dict(preset=preset, param_tag=tag, N=int(N), M=params.M, beta=params.beta,
                             gamma2=params.gamma2, phi=params.phi, std_err=tr.std_error[s, i],
                             runs=tr.runs, mean_LN=tr.mean_LN[s, i], LN_split=split.tag))
    return ResultTable(rows, [], [f"block {tag}: aborted_runs=0"], 0)


def _blocks(config: ExperimentConfig, cfg):
    """``(tag, ProtocolParams)`` for every block of the experiment."""
    kind = config.kind
    base = ExperimentConfig._params(cfg)
    if kind == "M_sweep":
        return [(f"M={m}", base.with_(M=m)) for m in cfg["M_values"]]
    if kind == "gamma_sweep":
        return [(f"gamma2={_fmt(float(g))}", base.with_(gamma2=float(g))) for g in cfg["gamma2_values"]]
    if kind == "ratio":
        return [(f"k0Ts={_fmt(float(k))}", base.with_(beta=2 * k / math.pi)) for k in cfg["k0Ts_values"]]
    return [(config.preset, base)]


def run_experiment(config: ExperimentConfig, tag_prefix: str = "") -> ResultTable:
    """Run a preset and return (and optionally write) its result table."""
    cfg = config.resolved()
    table = ResultTable(header=_header(config))
    worker = _entanglement_block if config.kind == "entanglement" else _fisher_block
    for tag, params in _blocks(config, cfg):
        if not tag_prefix:
            full_tag = tag
        elif tag == config.preset:
            full_tag = tag_prefix
        else:
            full_tag = f"{tag_prefix}:{tag}"
        log.info("running %s block %s", config.preset, full_tag)
        table.extend(worker(config.preset, full_tag, params, cfg, int(config.base_seed), config.threads))
    if config.output_path:
        table.write(config.output_path)
    return table


def _header(config: ExperimentConfig) -> list:
    return [f"seqmag {__version__} experiment", f"preset={config.preset}",
            f"base_seed={int(config.base_seed)}", "config: " + " ".join(config.echo())]


def sweep(parameter: str, values, base: ExperimentConfig) -> ResultTable:
    """Run ``base`` once per value of ``parameter`` with identical seeds."""
    if parameter not in SWEEPABLE:
        raise ValueError(f"parameter {parameter!r} is not sweepable; choose from {SWEEPABLE}")
    values = [parse_value(parameter, v) for v in values]
    table = ResultTable(header=_header(base) + [f"sweep {parameter} over "
                                                + ",".join(_fmt(v) for v in values)])
    for v in values:
        over = dict(base.overrides)
        if parameter == "beta":
            over.pop("k0Ts", None)
        over[parameter] = v
        cfg = ExperimentConfig(base.preset, over, None, base.base_seed, base.threads)
        part = run_experiment(cfg, tag_prefix=f"{parameter}={_fmt(v)}")
        table.extend(part)
    if base.output_path:
        table.write(base.output_path)
    return table


def read_csv(path) -> tuple:
    """Parse a result table back into ``(comments, rows)``; rows are dicts of strings."""
    comments, rows, cols = [], [], None
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if line.startswith("#"):
                comments.append(line[1:].strip())
            elif cols is None:
                cols = line.split(",")
            elif line:
                rows.append(dict(zip(cols, line.split(","))))
    if cols is not None and tuple(cols) != COLUMNS:
        raise ValueError(f"{path}: unexpected header {cols}")
    return comments, rows
