"""Command-line front end: ``seqmag <subcommand> [options] [key=value ...]``.

Exit status is 0 on success, 1 for invalid input (unknown flag or key, bad
value, failed cross-check) and 2 for runtime failures (probability
underflow, I/O).  Data goes to standard output or ``--output``; messages go
to standard error.
"""

from __future__ import annotations

import argparse
import inspect
import logging
import math
import re
import sys

import numpy as np

from . import __version__, analytic
from .experiments import KEYS, PRESETS, SWEEPABLE, ExperimentConfig, parse_value, run_experiment, sweep
from .protocol import TrajectoryUnderflow, effective_beta, run_trajectory

log = logging.getLogger("seqmag")

SUBCOMMANDS = {
    "simulate": "run one trajectory and print per-checkpoint likelihood data",
    "fisher": "Monte Carlo Fisher information for a preset (CSV)",
    "analytic": "evaluate a closed-form expression, e.g. 'analytic gamma_b k0Ts=0.01'",
    "entangle": "logarithmic negativity along trajectories (CSV)",
    "sweep": "repeat a preset over values of one parameter (CSV)",
    "validate": "run the brute-force oracle cross-checks",
}

ANALYTIC = {
    "gamma_b": analytic.gamma_b,
    "backaction_rate": analytic.backaction_rate,
    "total_decay": analytic.total_decay,
    "beta_from_k0Ts": analytic.beta_from_k0Ts,
    "effective_beta": effective_beta,
    "heisenberg_uncertainty": analytic.heisenberg_uncertainty,
    "hl_fisher": analytic.hl_fisher,
    "signal_probability": analytic.signal_probability,
    "signal_probability_general": analytic.signal_probability_general,
    "fisher_sum_exact": analytic.fisher_sum_exact,
    "fisher_closed_form": analytic.fisher_closed_form,
    "fisher_series": analytic.fisher_series,
    "closed_form_validity": analytic.closed_form_validity,
    "uncertainty_bound": analytic.uncertainty_bound,
    "fisher_asymptote": analytic.fisher_asymptote,
    "nv_alone_uncertainty": analytic.nv_alone_uncertainty,
    "crossover_M": analytic.crossover_M,
    "cramer_rao": analytic.cramer_rao,
    "field_uncertainty": analytic.field_uncertainty,
}


class UsageError(Exception):
    """Invalid command line or configuration (exit status 1)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _keys_help() -> str:
    lines = ["configuration keys (key=value on the command line or in --config files):"]
    for k, (_, unit, desc) in KEYS.items():
        lines.append(f"  {k:<14} {'[' + unit + ']':<16} {desc}")
    lines.append("")
    lines.append("presets: " + ", ".join(PRESETS))
    lines.append("environment: SEQMAG_THREADS sets the default thread count; "
                 "SEQMAG_PURE_PYTHON=1 disables the compiled kernels")
    return "\n".join(lines)


def _main_help() -> str:
    lines = ["usage: seqmag <subcommand> [options] [key=value ...]", "",
             "Sequential weak-measurement magnetometry simulator.", "", "subcommands:"]
    for name, desc in SUBCOMMANDS.items():
        lines.append(f"  {name:<10} {desc}")
    lines += ["", "run 'seqmag <subcommand> --help' for its options.", "", _keys_help(), "",
              "analytic expressions: " + ", ".join(ANALYTIC)]
    return "\n".join(lines)


def _threads(v):
    if v == "auto":
        return None
    try:
        n = int(v)
    except ValueError:
        raise argparse.ArgumentTypeError(f"--threads expects an integer or 'auto', got {v!r}")
    if n < 1:
        raise argparse.ArgumentTypeError("--threads must be >= 1")
    return n


def _subparser(name: str) -> argparse.ArgumentParser:
    p = _Parser(prog=f"seqmag {name}", description=SUBCOMMANDS[name], epilog=_keys_help(),
                formatter_class=argparse.RawDescriptionHelpFormatter)
    if name == "analytic":
        p.add_argument("expression", help="one of: " + ", ".join(ANALYTIC))
        p.add_argument("args", nargs="*", metavar="key=value", help="arguments of the expression")
        p.add_argument("--digits", type=int, default=5, help="significant digits printed (default 5)")
        return p
    if name == "validate":
        p.add_argument("--max-M", type=int, default=6, dest="max_M",
                       help="largest spin count checked against the full space (default 6)")
        p.add_argument("--seeds", type=int, default=5, help="seeds per trajectory comparison")
        p.add_argument("--runs", type=int, default=2000, help="Monte Carlo runs of the exhaustive check")
        return p
    p.add_argument("overrides", nargs="*", metavar="key=value", help="configuration overrides")
    p.add_argument("--config", help="flat key=value configuration file")
    p.add_argument("--seed", type=int, default=0, help="base seed; run i uses seed+i (default 0)")
    p.add_argument("--threads", type=_threads, default=None,
                   help="worker threads or 'auto' (default: SEQMAG_THREADS or all cores)")
    p.add_argument("--output", help="output file (default standard output)")
    p.add_argument("-v", "--verbose", action="store_true", help="progress messages on standard error")
    if name in ("fisher", "sweep"):
        p.add_argument("--preset", default="custom", choices=sorted(PRESETS))
    if name == "sweep":
        p.add_argument("--param", required=True, choices=SWEEPABLE, help="parameter to sweep")
        p.add_argument("--values", required=True, help="comma-separated values (may be empty)")
    return p


def _pairs(items, what):
    out = {}
    for item in items:
        if "=" not in item:
            raise UsageError(f"expected key=value in {what}, got {item!r}")
        k, v = (s.strip() for s in item.split("=", 1))
        if not k:
            raise UsageError(f"empty key in {what}: {item!r}")
        if k in out:
            raise UsageError(f"duplicate key {k!r} in {what}")
        out[k] = v
    return out


def read_config(path) -> dict:
    """Flat ``key = value`` file; ``#`` starts a comment."""
    try:
        with open(path, encoding="utf-8") as f:
            lines = [ln.split("#", 1)[0].strip() for ln in f]
    except OSError as e:
        raise OSError(f"cannot read config file {path}: {e.strerror or e}") from e
    return _pairs([ln for ln in lines if ln], f"config file {path}")


def _overrides(args) -> dict:
    cfg = read_config(args.config) if args.config else {}
    cfg.update(_pairs(args.overrides, "command-line overrides"))
    for k, v in cfg.items():
        if k not in KEYS:
            raise UsageError(f"unknown config key {k!r}")
        try:
            parse_value(k, v)
        except ValueError as e:
            raise UsageError(str(e))
    return cfg


def _config(args, preset, output=True) -> ExperimentConfig:
    try:
        return ExperimentConfig(preset, _overrides(args), args.output if output else None,
                                args.seed, args.threads)
    except (KeyError, ValueError) as e:
        raise UsageError(str(e.args[0] if isinstance(e, KeyError) else e))


def _emit(text, path):
    if path:
        try:
            with open(path, "w", encoding="utf-8", newline="") as f:
                f.write(text)
        except OSError as e:
            raise OSError(f"cannot write {path}: {e.strerror or e}") from e
    else:
        sys.stdout.write(text)


def fmt_number(x, digits=5) -> str:
    """Compact ``%g`` formatting with exponents stripped of padding zeros."""
    s = f"{float(x):.{digits}g}"
    return re.sub(r"e([+-])0*(\d)", lambda m: f"e{'' if m.group(1) == '+' else '-'}{m.group(2)}", s)


def _parse_arg(v: str):
    low = v.lower()
    if low in ("true", "false"):
        return low == "true"
    if "," in v:
        return np.array([float(x) for x in v.split(",") if x.strip()])
    try:
        f = float(v)
    except ValueError:
        raise UsageError(f"cannot parse value {v!r}")
    return int(f) if re.fullmatch(r"[+-]?\d+", v.strip()) else f


def cmd_analytic(args) -> int:
    name = args.expression
    if name not in ANALYTIC:
        raise UsageError(f"unknown expression {name!r}; choose from {', '.join(ANALYTIC)}")
    fn = ANALYTIC[name]
    kw = {k: _parse_arg(v) for k, v in _pairs(args.args, name).items()}
    params = inspect.signature(fn).parameters
    if "beta" in params and "beta" not in kw and "k0Ts" in kw and "k0Ts" not in params:
        kw["beta"] = 2 * kw.pop("k0Ts") / math.pi
    for k in kw:
        if k not in params:
            raise UsageError(f"{name} has no argument {k!r}; expected {', '.join(params)}")
    missing = [k for k, p in params.items() if p.default is inspect.Parameter.empty and k not in kw]
    if missing:
        raise UsageError(f"{name} needs {', '.join(missing)}")
    try:
        out = fn(**kw)
    except (ValueError, ArithmeticError) as e:
        raise UsageError(f"{name}: {e}")
    lines = []
    if isinstance(out, dict):
        lines = [f"{k}={v}" for k, v in out.items()]
    else:
        for item in out if isinstance(out, tuple) else (out,):
            lines += [fmt_number(v, args.digits) for v in np.atleast_1d(item)]
    _emit("\n".join(lines) + "\n", None)
    return 0


def cmd_simulate(args) -> int:
    cfg = _config(args, "custom", output=False).resolved()
    params = ExperimentConfig._params(cfg)
    rec = run_trajectory(params, args.seed, engine=cfg["engine"])
    t2 = params.tau_m**2
    lines = [f"# seqmag {__version__} trajectory", f"# seed={args.seed}",
             "# config: " + " ".join(f"{k}={v}" for k, v in sorted(cfg.items())
                                     if not isinstance(v, list)),
             "N,logp,dlog_plus,dlog_minus,score,score_sq_FI,conditional_FI"]
    for i, N in enumerate(rec.checkpoints):
        lines.append(",".join([str(int(N))] + [repr(float(v)) for v in (
            rec.logp_center[i], rec.dlog_plus[i], rec.dlog_minus[i], rec.score[i],
            rec.score[i] ** 2 * t2, rec.cond_fisher[i] * t2)]))
    ones = int(rec.outcomes.sum())
    print(f"simulate: N={rec.N}, outcomes -: {ones}, +: {rec.N - ones}", file=sys.stderr)
    _emit("\n".join(lines) + "\n", args.output)
    return 0


def _report(table, what):
    print(f"{what}: {len(table.rows)} rows, {table.aborted} aborted runs", file=sys.stderr)


def cmd_fisher(args) -> int:
    config = _config(args, args.preset)
    table = run_experiment(config)
    if not args.output:
        _emit(table.to_csv(), None)
    _report(table, "fisher")
    return 0


def cmd_entangle(args) -> int:
    config = _config(args, "fig3si_entanglement")
    table = run_experiment(config)
    if not args.output:
        _emit(table.to_csv(), None)
    _report(table, "entangle")
    return 0


def cmd_sweep(args) -> int:
    config = _config(args, args.preset)
    values = [v.strip() for v in args.values.split(",") if v.strip()]
    try:
        values = [parse_value(args.param, v) for v in values]
    except ValueError as e:
        raise UsageError(str(e))
    table = sweep(args.param, values, config)
    if not args.output:
        _emit(table.to_csv(), None)
    _report(table, "sweep")
    return 0


def cmd_validate(args) -> int:
    from .oracles import validate

    if not 1 <= args.max_M <= 12:
        raise UsageError("--max-M must lie in 1..12")
    checks = validate(args.max_M, args.seeds, args.runs)
    _emit("\n".join(c.line() for c in checks) + "\n", None)
    failed = [c.name for c in checks if not c.passed]
    print(f"validate: {len(checks) - len(failed)}/{len(checks)} checks passed", file=sys.stderr)
    return 1 if failed else 0


COMMANDS = {"simulate": cmd_simulate, "fisher": cmd_fisher, "analytic": cmd_analytic,
            "entangle": cmd_entangle, "sweep": cmd_sweep, "validate": cmd_validate}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        if not argv:
            print(_main_help(), file=sys.stderr)
            return 1
        if argv[0] in ("-h", "--help"):
            print(_main_help())
            return 0
        if argv[0] == "--version":
            print(__version__)
            return 0
        name = argv[0]
        if name not in COMMANDS:
            raise UsageError(f"unknown subcommand {name!r}; choose from {', '.join(COMMANDS)}")
        parser = _subparser(name)
        try:
            args = parser.parse_intermixed_args(argv[1:])
        except SystemExit as e:  # --help
            return int(e.code or 0)
        logging.basicConfig(stream=sys.stderr, format="%(message)s",
                            level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING)
        return COMMANDS[name](args)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except (TrajectoryUnderflow, OSError) as e:
        print(f"runtime error: {e}", file=sys.stderr)
        return 2
    except Exception as e:  # anything unexpected is a runtime failure
        print(f"runtime error: {type(e).__name__}: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
