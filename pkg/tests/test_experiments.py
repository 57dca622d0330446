import numpy as np
import pytest

from omdlab import checks
from omdlab.cli import main
from omdlab.errors import ConfigError
from omdlab.experiments import (ExperimentConfig, curves_csv, emit_curves, parse_config_text,
                                run_experiment, serialize_config)
from omdlab.geometry import TruncatedSimplex
from omdlab.regularizers import make


def test_minimal_config_defaults():
    cfg = parse_config_text("experiment = synthetic\n")
    assert (cfg.T, cfg.epsilon, cfg.sup_samples, cfg.seed) == (100, 1e-6, 2000, 42)
    assert cfg.eta_mode == "one_over_beta" and cfg.comparator == "per_round_min"
    assert parse_config_text("experiment = poisson").m == 150
    assert parse_config_text("experiment = poisson\nfull_scale = true").m == 1500


def test_config_errors():
    with pytest.raises(ConfigError, match="epsilon"):
        parse_config_text("experiment = synthetic\nd = 10\nepsilon = 0.5")
    with pytest.raises(ConfigError, match=":2:"):
        parse_config_text("experiment = synthetic\nnot a pair\n")
    with pytest.raises(ConfigError, match="bogus, other"):
        parse_config_text("experiment = synthetic\nother = 1\nbogus = 2")
    with pytest.raises(ConfigError, match=":2:"):
        parse_config_text("experiment = synthetic\nT = many")
    with pytest.raises(ConfigError):
        parse_config_text("experiment = synthetic\nregularizers = burg, huber")


def test_config_roundtrip():
    text = """# comment line
experiment = doptimal   # trailing comment
T = 30
regularizers = burg, kl
eta_mode = manual(0.25)
comparator = file(/tmp/u.csv)
seed = 3
"""
    cfg = parse_config_text(text)
    assert cfg.eta == 0.25 and cfg.comparator_path == "/tmp/u.csv"
    assert parse_config_text(serialize_config(cfg)) == cfg


def test_curves_csv_shape(tmp_path):
    text = curves_csv({"burg": np.array([1.5])})
    assert text.splitlines() == ["round,burg", "1,1.5"]
    emit_curves({"a": np.arange(3.0), "b": np.ones(3)}, tmp_path / "c.csv")
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0] == "round,a,b" and len(lines) == 4
    assert all(len(row.split(",")) == 3 for row in lines)


def test_synthetic_run_writes_outputs(tmp_path):
    cfg = ExperimentConfig("synthetic", T=20, seed=1, sup_samples=64, output_dir=str(tmp_path))
    res = run_experiment(cfg)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == sorted(["curve.csv", "summary.txt"] + [f"trajectory_{r}.csv" for r in cfg.regularizers]
                           + [f"report_{r}.csv" for r in cfg.regularizers])
    assert all(rep.all_verdicts_pass for rep in res.reports.values())
    summary = (tmp_path / "summary.txt").read_text()
    assert "defaults chosen by this tool" in summary and "T=100" not in summary


def test_poisson_curve_nondecreasing():
    cfg = ExperimentConfig("poisson", T=15, m=20, d=4, seed=2, sup_samples=64, certify_samples=300)
    res = run_experiment(cfg, write=False)
    for curve in res.curves.values():
        assert np.all(np.diff(curve) >= 0)
    assert all(rep.all_verdicts_pass for rep in res.reports.values())


def test_step_checks_on_short_run():
    cfg = ExperimentConfig("doptimal", T=15, seed=5, sup_samples=64, certify_samples=300)
    res = run_experiment(cfg, write=False)
    fset = cfg.feasible_set()
    from omdlab.experiments import build_costs

    c = build_costs(cfg)
    for name, traj in res.trajectories.items():
        gamma = res.certificates[name].consts.gamma
        for r in (checks.optimality_residual(traj, fset), checks.descent_inequality(traj, c, fset),
                  checks.bregman_lipschitz(traj, res.comparators, gamma, fset),
                  checks.telescoping(traj, res.comparators, fset)):
            assert r.passed, r.line()


def test_three_point_identity_check():
    fset = TruncatedSimplex(4, 1e-6)
    rng = np.random.default_rng(0)
    X, Y, Z = (fset.sample(200, rng) for _ in range(3))
    for name in ("l2sq", "kl", "burg", "l1sq"):
        assert checks.three_point_identity(make(name, 4), X, Y, Z).passed


def test_cli_exit_codes(tmp_path, capsys):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("experiment = synthetic\nT = 10\nsup_samples = 64\ncertify_samples = 200\n")
    assert main(["run", str(cfg), "--out", str(tmp_path / "out"), "--seed", "4"]) == 0
    assert (tmp_path / "out" / "curve.csv").exists()
    assert main(["certify", str(cfg)]) == 0
    out = capsys.readouterr().out
    assert "regularizer,geometry,beta,lambda,gamma,R,M" in out
    assert main(["verify", str(cfg)]) == 0
    assert "0 failed" in capsys.readouterr().out

    bad = tmp_path / "bad.cfg"
    bad.write_text("experiment = synthetic\nepsilon = 0.5\n")
    assert main(["run", str(bad)]) == 5
    assert main(["run", str(tmp_path / "missing.cfg")]) == 5
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert main(["run", str(cfg), "--out", str(blocker / "sub")]) == 4


def test_cli_certification_failure(tmp_path, monkeypatch):
    from omdlab import experiments
    from omdlab.errors import CertificationError

    def boom(*a, **k):
        raise CertificationError("degenerate direction")

    monkeypatch.setattr(experiments, "certify_arm", boom)
    cfg = tmp_path / "c.cfg"
    cfg.write_text("experiment = synthetic\nT = 5\n")
    assert main(["certify", str(cfg)]) == 2


def test_cli_solver_failure(tmp_path, monkeypatch):
    from omdlab import experiments
    from omdlab.errors import SolverError

    def boom(*a, **k):
        raise SolverError("bisection stalled", round_index=7)

    monkeypatch.setattr(experiments, "run_omd", boom)
    cfg = tmp_path / "c.cfg"
    cfg.write_text("experiment = synthetic\nT = 10\nsup_samples = 64\ncertify_samples = 100\n")
    assert main(["run", str(cfg), "--out", str(tmp_path / "o")]) == 3
