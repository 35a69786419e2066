import math

import numpy as np
import pytest

from seqmag import analytic as an
from seqmag.experiments import (COLUMNS, KEYS, PRESETS, ExperimentConfig, ResultTable, parse_value,
                                read_csv, run_experiment, sweep)
from seqmag.protocol import checkpoints_pow2

SMOKE = dict(runs=2, N_max=16, M=2)


def _check_schema(path):
    comments, rows = read_csv(path)
    assert rows
    for r in rows:
        assert tuple(r) == COLUMNS
        for k, v in r.items():
            assert v.lower() not in ("nan", "inf", "-inf"), (k, v)
    return comments, rows


def test_smoke_custom(tmp_path):
    out = tmp_path / "a.csv"
    table = run_experiment(ExperimentConfig("custom", SMOKE, str(out), base_seed=3))
    comments, rows = _check_schema(out)
    assert [int(r["N"]) for r in rows] == [1, 2, 4, 8, 16]
    assert "base_seed=3" in comments and "preset=custom" in comments
    assert comments[-1] == "total_aborted_runs=0"
    assert all(r["mean_LN"] == "" and r["LN_split"] == "" for r in rows)
    # inline overlays
    N = table.column("N").astype(float)
    beta = 2 * 0.01 / math.pi
    eq9 = an.fisher_closed_form(N, 2, 0.01, 1.0, an.total_decay(beta))
    assert np.allclose(table.column("analytic_eq9"), eq9)
    assert np.allclose(table.column("hl_fisher"), 9 * N**2)


def test_deterministic_csv(tmp_path):
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    for p in (a, b):
        run_experiment(ExperimentConfig("fig1_product", dict(SMOKE, M=3, N_max=64), str(p), base_seed=7))
    assert a.read_bytes() == b.read_bytes()
    c = tmp_path / "c.csv"
    run_experiment(ExperimentConfig("fig1_product", dict(SMOKE, M=3, N_max=64), str(c), base_seed=8))
    assert a.read_bytes() != c.read_bytes()


def test_threads_do_not_change_output():
    over = dict(SMOKE, runs=6, N_max=128)
    a = run_experiment(ExperimentConfig("custom", over, threads=1)).to_csv()
    b = run_experiment(ExperimentConfig("custom", over, threads=3)).to_csv()
    assert a == b


def test_presets_resolve():
    for name in PRESETS:
        cfg = ExperimentConfig(name).resolved()
        assert cfg["beta"] == pytest.approx(2 * cfg["k0Ts"] / math.pi)
    assert ExperimentConfig("fig1_mixed").resolved()["runs"] == 32
    assert ExperimentConfig("fig1_product").resolved()["runs"] == 96
    assert ExperimentConfig("fig2_M_sweep", {"M": 7}).resolved()["M_values"] == [7]


def test_config_validation():
    with pytest.raises(KeyError):
        ExperimentConfig("custom", {"bogus": 1})
    with pytest.raises(ValueError):
        ExperimentConfig("nope")
    with pytest.raises(ValueError):
        ExperimentConfig("custom", {"beta": 0.1, "k0Ts": 0.1})
    with pytest.raises(ValueError):
        ExperimentConfig("custom", {"runs": 1})
    with pytest.raises(ValueError):
        ExperimentConfig("custom", {"M": 0})
    with pytest.raises(ValueError):
        ExperimentConfig("custom", base_seed=-1)
    with pytest.raises(ValueError):
        parse_value("M", "2.5")
    assert parse_value("M_values", "5, 10") == [5, 10]
    assert set(KEYS) >= {"M", "k0Ts", "beta", "phi", "tau_m", "gamma2", "polarization", "N_max", "runs"}


def test_beta_override():
    cfg = ExperimentConfig("custom", {"beta": 0.02}).resolved()
    assert cfg["k0Ts"] == pytest.approx(0.01 * math.pi)


def test_M_sweep_blocks():
    t = run_experiment(ExperimentConfig("fig2_M_sweep", dict(runs=2, N_max=8, M_values=[2, 3])))
    assert sorted(set(t.column("param_tag"))) == ["M=2", "M=3"]
    assert set(t.column("M")) == {2, 3}


def test_gamma_sweep_local_engine():
    t = run_experiment(ExperimentConfig("figdec_gamma_sweep",
                                        dict(runs=2, N_max=32, M=3, gamma2_values=[1e-3, 1e-2])))
    assert sorted(set(t.column("gamma2"))) == [1e-3, 1e-2]
    assert np.all(t.column("mean_FI") >= 0)


def test_ratio_blocks():
    t = run_experiment(ExperimentConfig("fig2si_ratio", dict(runs=2, N_max=16, M=2)))
    assert sorted(set(t.column("param_tag"))) == ["k0Ts=0.01", "k0Ts=0.05"]
    # four checkpoints per octave, rounded and deduplicated
    sel = t.column("param_tag") == "k0Ts=0.01"
    assert np.array_equal(t.column("N")[sel], checkpoints_pow2(16, 4))
    assert 8 in t.column("N")[sel] and 11 in t.column("N")[sel]


def test_entanglement_rows(tmp_path):
    out = tmp_path / "ln.csv"
    run_experiment(ExperimentConfig("fig3si_entanglement", dict(runs=2, N_max=32, M=4), str(out)))
    _, rows = _check_schema(out)
    assert {r["LN_split"] for r in rows} == {"1|3", "2|2"}
    assert all(r["mean_FI"] == "" for r in rows)
    first = [float(r["mean_LN"]) for r in rows if r["N"] == "0"]
    assert first == [0.0, 0.0]


def test_sweep(tmp_path):
    base = ExperimentConfig("custom", dict(SMOKE), str(tmp_path / "s.csv"))
    t = sweep("gamma2", [1e-3, 1e-2], base)
    assert sorted(set(t.column("param_tag"))) == ["gamma2=0.001", "gamma2=0.01"]
    _check_schema(tmp_path / "s.csv")
    # identical seeds across values: the gamma2 = 0 block repeats a plain run exactly
    t0 = sweep("gamma2", [0.0], ExperimentConfig("custom", dict(SMOKE)))
    plain = run_experiment(ExperimentConfig("custom", dict(SMOKE, gamma2=0.0)))
    assert np.array_equal(t0.column("mean_FI"), plain.column("mean_FI"))


def test_sweep_beta_replaces_k0Ts():
    t = sweep("beta", [0.01, 0.05], ExperimentConfig("custom", dict(SMOKE, k0Ts=0.02)))
    assert sorted(set(t.column("beta"))) == [0.01, 0.05]


def test_sweep_empty_and_unknown():
    t = sweep("M", [], ExperimentConfig("custom", dict(SMOKE)))
    assert t.rows == []
    csv = t.to_csv()
    assert ",".join(COLUMNS) in csv
    with pytest.raises(ValueError):
        sweep("runs", [2], ExperimentConfig("custom", dict(SMOKE)))


def test_nonfinite_rejected():
    t = ResultTable([dict(preset="custom", mean_FI=float("nan"))])
    with pytest.raises(ValueError):
        t.to_csv()


def test_write_error_names_path(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(OSError, match="file"):
        ResultTable().write(str(blocker / "out.csv"))


def test_read_csv_rejects_foreign_header(tmp_path):
    p = tmp_path / "x.csv"
    p.write_text("a,b\n1,2\n")
    with pytest.raises(ValueError):
        read_csv(p)
