import json

import pytest

from paritylab import cli, dynamics


def _run(tmp_path, *argv):
    return cli.main([*argv, "--out", str(tmp_path)])


def test_bounds_table(tmp_path, capsys):
    assert _run(tmp_path, "bounds", "--sizes", "18", "100") == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0].startswith("N,alpha0,alpha1,alpha2")
    assert out[2].startswith("100,10.0368")
    assert (tmp_path / "bounds.csv").exists() and (tmp_path / "bounds_manifest.json").exists()


def test_train_writes_trace_and_manifest(tmp_path):
    assert _run(tmp_path, "train", "--n", "10", "--pe", "0.1", "--alpha", "0.5", "--m", "1000", "--seed", "3") == 0
    assert (tmp_path / "train.csv").read_text().startswith("step,l1,mu0,sig0,mu1,sig1,loss")
    doc = json.loads((tmp_path / "train_manifest.json").read_text())
    assert doc["seed"] == 3 and doc["config"]["alpha"] == 0.5
    assert doc["results"]["convergence_step"] is not None


def test_precedence(tmp_path):
    conf = tmp_path / "c.json"
    conf.write_text(json.dumps({"N": 12, "alpha": 0.3, "M": 50}))
    args = cli._parser().parse_args(["train", "--config", str(conf), "--alpha", "0.7"])
    cfg = cli.build_config(args)
    assert (cfg.N, cfg.M, cfg.alpha, cfg.S) == (12, 50, 0.7, cli.DEFAULTS["train"]["S"])
    assert cfg.p_e == pytest.approx(1 / 12)


def test_theory_default_rate():
    cfg = cli.build_config(cli._parser().parse_args(["theory-vs-empirical", "--n", "200"]))
    assert cfg.alpha == pytest.approx(0.9 * dynamics.alpha2(200))


def test_negative_seed_rejected(tmp_path):
    with pytest.raises(SystemExit):
        _run(tmp_path, "train", "--seed", "-1")


def test_invalid_value_reports_error(tmp_path, capsys):
    assert _run(tmp_path, "train", "--n", "10", "--pe", "1.5") == 2
    assert "error" in capsys.readouterr().err


def test_effective_grid_parsing():
    assert cli._effective_grid(["10:1:0.01:1000"], 10) == ((10.0, 1.0, 0.01, 1000.0),)
    default = cli._effective_grid(None, 10)
    assert (10, 1.0, 0.01, 1000) in default and (10, 10.0, 0.001, 1000) in default


def test_sweep_pe_small(tmp_path):
    assert _run(tmp_path, "sweep-pe", "--n", "10", "--p", "4", "--steps", "2000", "--grid", "0.1", "0.9") == 0
    doc = json.loads((tmp_path / "sweep_pe_manifest.json").read_text())
    assert doc["results"]["p_e_star"] == pytest.approx(0.1)
    assert doc["grid"] == [0.1, 0.9]


def test_unknown_command():
    with pytest.raises(SystemExit):
        cli.main(["nope"])
