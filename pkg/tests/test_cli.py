import csv
import json

import numpy as np
import pytest

from mvexpectile.cli import ConfigError, main, parse_config, run
from mvexpectile.distributions import Exponential, Fgm, Independence, sample, ModelSpec


# ---------------------------------------------------------------------------
# parse_config
# ---------------------------------------------------------------------------


def test_minimal_config_fills_defaults(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(
        json.dumps({"command": "solve", "model": "exp(0.05,0.25)", "sigma": "ones", "alpha": 0.7})
    )
    cfg = parse_config(str(path))
    assert cfg.command == "solve"
    assert cfg.alpha == 0.7
    assert cfg.tol == 1e-10
    assert cfg.iterations == 100_000
    assert cfg.runs == 100
    assert (cfg.schedule.a, cfg.schedule.b, cfg.schedule.kappa) == (1.0, 0.0, 1.0)
    assert cfg.model.d == 2
    assert isinstance(cfg.model.copula, Independence)
    np.testing.assert_array_equal(cfg.sigma.entries, np.ones((2, 2)))


def test_flags_override_config_file(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"command": "solve", "model": "exp(1)", "sigma": "identity", "alpha": 0.5}))
    cfg = parse_config(["solve", "--config", str(path), "--alpha", "0.9", "--seed", "3"])
    assert cfg.alpha == 0.9
    assert cfg.seed == 3


def test_non_psd_sigma_rejected():
    with pytest.raises(ConfigError, match="sigma"):
        parse_config(["solve", "--model", "exp(1,1)", "--sigma", "[[1,2],[2,1]]", "--alpha", "0.7"])


def test_alpha_outside_open_interval_rejected():
    with pytest.raises(ConfigError, match="alpha"):
        parse_config(["solve", "--model", "exp(1,1)", "--sigma", "ones", "--alpha", "1.0"])


def test_unknown_config_key_rejected(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"command": "solve", "model": "exp(1)", "sigma": "ones", "alpha": 0.5, "bogus": 1}))
    with pytest.raises(ConfigError, match="bogus"):
        parse_config(str(path))


def test_missing_required_fields_named():
    with pytest.raises(ConfigError, match="model"):
        parse_config(["solve", "--sigma", "ones", "--alpha", "0.7"])
    with pytest.raises(ConfigError, match="alpha"):
        parse_config(["solve", "--model", "exp(1,1)", "--sigma", "ones"])
    with pytest.raises(ConfigError, match="data"):
        parse_config(["empirical", "--sigma", "ones", "--alpha", "0.7"])


def test_model_grammar():
    cfg = parse_config(["solve", "--model", "pareto(2,10,20)", "--sigma", "ones", "--alpha", "0.7"])
    assert cfg.model.d == 2
    assert cfg.model.marginals[0].shape == 2.0
    cfg = parse_config(
        ["solve", "--model", "exp(0.05,0.25)", "--copula", "fgm(1)", "--sigma", "ones", "--alpha", "0.85"]
    )
    assert isinstance(cfg.model.copula, Fgm)
    with pytest.raises(ConfigError, match="model"):
        parse_config(["solve", "--model", "cauchy(1)", "--sigma", "ones", "--alpha", "0.5"])
    with pytest.raises(ConfigError, match="copula"):
        parse_config(["solve", "--model", "exp(1,1)", "--copula", "clayton(2)", "--sigma", "ones", "--alpha", "0.5"])


def test_seed_env_var_is_default_only(tmp_path, monkeypatch):
    monkeypatch.setenv("MVEXPECTILE_SEED", "314")
    cfg = parse_config(["props"])
    assert cfg.seed == 314
    cfg = parse_config(["props", "--seed", "9"])
    assert cfg.seed == 9


def test_data_file_must_exist():
    with pytest.raises(ConfigError, match="data"):
        parse_config(["empirical", "--data", "/no/such/file.csv", "--sigma", "ones", "--alpha", "0.5"])


def test_alpha_grid_forms():
    cfg = parse_config(["sweep-alpha", "--model", "exp(1,1)", "--sigma", "ones", "--alphas", "0.1:0.9:9"])
    assert len(cfg.alphas) == 9
    cfg = parse_config(["sweep-alpha", "--model", "exp(1,1)", "--sigma", "ones", "--alphas", "0.2,0.5,0.8"])
    assert cfg.alphas == [0.2, 0.5, 0.8]


# ---------------------------------------------------------------------------
# run + CSV contracts
# ---------------------------------------------------------------------------


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], rows[1:]


def test_solve_writes_expected_csv(tmp_path, capsys):
    out = tmp_path / "solve.csv"
    code = main(
        ["solve", "--model", "exp(0.05,0.25)", "--sigma", "ones", "--alpha", "0.7", "--out", str(out)]
    )
    assert code == 0
    header, rows = _read_csv(out)
    assert header == ["alpha", "x_1", "x_2", "residual_norm", "iterations"]
    assert len(rows) == 1
    assert float(rows[0][0]) == 0.7
    assert capsys.readouterr().out.startswith("solve:")


def test_csv_floats_round_trip(tmp_path):
    out = tmp_path / "solve.csv"
    main(["solve", "--model", "exp(0.05,0.25)", "--sigma", "ones", "--alpha", "0.7", "--out", str(out)])
    from mvexpectile import ScoringMatrix, solve_analytic

    result = solve_analytic(
        ModelSpec((Exponential(0.05), Exponential(0.25))), ScoringMatrix.ones(2), 0.7
    )
    _, rows = _read_csv(out)
    assert float(rows[0][1]) == result.point[0]  # exact: shortest round-trip repr
    assert float(rows[0][2]) == result.point[1]
    assert float(rows[0][3]) == result.residual_norm


def test_empirical_command(tmp_path):
    data = tmp_path / "data.csv"
    rows = sample(ModelSpec((Exponential(0.2), Exponential(1.0))), 40, seed=8).rows
    np.savetxt(data, rows, delimiter=",")
    out = tmp_path / "emp.csv"
    code = main(["empirical", "--data", str(data), "--sigma", "ones", "--alpha", "0.6", "--out", str(out)])
    assert code == 0
    header, body = _read_csv(out)
    assert header == ["alpha", "x_1", "x_2", "residual_norm", "iterations"]
    assert len(body) == 1


def test_estimate_deterministic_csv(tmp_path):
    args = [
        "estimate", "--model", "exp(0.05,0.25)", "--sigma", "ones", "--alpha", "0.7",
        "--runs", "2", "--iterations", "100", "--seed", "5",
    ]
    out1, out2 = tmp_path / "a.csv", tmp_path / "b.csv"
    assert main(args + ["--out", str(out1)]) == 0
    assert main(args + ["--out", str(out2)]) == 0
    assert out1.read_bytes() == out2.read_bytes()


def test_sweep_alpha_rows_ascending(tmp_path):
    out = tmp_path / "sweep.csv"
    code = main(
        ["sweep-alpha", "--model", "exp(0.05,0.25)", "--sigma", "ones",
         "--alphas", "0.9,0.1,0.5,0.3,0.7,0.2,0.4,0.6,0.8", "--out", str(out)]
    )
    assert code == 0
    _, rows = _read_csv(out)
    alphas = [float(r[0]) for r in rows]
    assert len(alphas) == 9
    assert alphas == sorted(alphas)


def test_sweep_steps_table(tmp_path):
    out = tmp_path / "steps.csv"
    code = main(
        ["sweep-steps", "--model", "exp(0.05,0.25)", "--sigma", "ones", "--alpha", "0.7",
         "--schedules", "1,0,1;1,0,0.6", "--runs", "2", "--iterations", "2000", "--out", str(out)]
    )
    assert code == 0
    header, rows = _read_csv(out)
    assert header[:3] == ["a", "b", "kappa"]
    assert len(rows) == 2


def test_props_command(tmp_path):
    out = tmp_path / "props.csv"
    code = main(["props", "--instances", "2", "--seed", "0", "--out", str(out)])
    assert code == 0
    header, rows = _read_csv(out)
    assert header == ["property", "instances", "skipped", "max_violation", "tol", "passed"]
    assert len(rows) == 8


def test_config_error_exit_code(tmp_path, capsys):
    assert main(["solve", "--model", "exp(1,1)", "--sigma", "[[1,2],[2,1]]", "--alpha", "0.7"]) == 2
    assert "sigma" in capsys.readouterr().err


def test_nonconvergence_exit_code():
    # one Newton iteration cannot reach tolerance from the default start
    code = main(
        ["solve", "--model", "exp(0.05,0.25)", "--sigma", "ones", "--alpha", "0.7", "--max-iter", "1"]
    )
    assert code == 3


def test_trace_opt_in(tmp_path):
    trace = tmp_path / "trace.csv"
    main(
        ["solve", "--model", "exp(0.05,0.25)", "--sigma", "ones", "--alpha", "0.7",
         "--trace", str(trace)]
    )
    header, rows = _read_csv(trace)
    assert header == ["iteration", "x_1", "x_2"]
    assert len(rows) >= 2
