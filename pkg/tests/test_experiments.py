import json

import pytest
from click.testing import CliRunner

from gridphp.cli import main
from gridphp.experiments import (
    ConfigError,
    ExperimentConfig,
    PipelineExhausted,
    run_pipeline,
    run_switch_mc,
    wilson,
)

TOY = dict(C=1.0, m=3, delta=2, R=2, trials=30, k=0, max_per_super=10, min_per_pair=0,
           tau_steps=50)


def test_config_needs_C():
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"n": 451})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"C": 1, "colour": "red"})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"C": 1, "n": 450})
    with pytest.raises(ConfigError):
        ExperimentConfig.from_dict({"C": 1, "m": 4})


def test_config_file_and_overrides(tmp_path):
    path = tmp_path / "cfg.json"
    path.write_text(json.dumps({"C": 2.0, "trials": 5}))
    cfg = ExperimentConfig.load(path, {"trials": 7, "seed": None})
    assert (cfg.C, cfg.trials, cfg.seed) == (2.0, 7, 0)


def test_wilson_interval():
    lo, hi = wilson(0, 100)
    assert lo == pytest.approx(0.0, abs=1e-12) and 0.03 < hi < 0.04
    with pytest.raises(ValueError):
        wilson(0, 0)


def test_zero_depth_families_never_fail():
    rep = run_switch_mc(ExperimentConfig.from_dict({**TOY, "t": 0}))
    assert rep.aggregate["failed"]["count"] == 0


def test_switch_mc_is_deterministic(tmp_path):
    cfg = ExperimentConfig.from_dict({**TOY, "t": 3, "s": 0, "k": 2})
    a, b = run_switch_mc(cfg), run_switch_mc(cfg)
    assert a.rows == b.rows
    a.write(tmp_path / "r.json", tmp_path / "r.csv")
    data = json.loads((tmp_path / "r.json").read_text())
    assert data["trials"] == 30
    assert (tmp_path / "r.csv").read_text().count("\n") == 31


def test_switch_mc_common_trees():
    cfg = ExperimentConfig.from_dict({**TOY, "t": 2, "M": 3, "trials": 10})
    rep = run_switch_mc(cfg)
    assert "common_failed" in rep.aggregate


def test_pipeline_rounds():
    rep = run_pipeline(ExperimentConfig.from_dict({"C": 1.0, "d": 0}))
    assert rep.aggregate["rounds"] == 0 and rep.aggregate["all_valid"]
    rep = run_pipeline(ExperimentConfig.from_dict({"C": 1.0, "d": 1}))
    assert rep.aggregate["final_n"] == 3 and rep.aggregate["all_valid"]
    with pytest.raises(PipelineExhausted) as exc:
        run_pipeline(ExperimentConfig.from_dict({"C": 1.0, "d": 2}))
    assert exc.value.round_index == 2


# command line -------------------------------------------------------------------


def run(*args):
    return CliRunner().invoke(main, list(args))


def test_cli_tile_check(tmp_path):
    good = tmp_path / "bar.txt"
    good.write_text("1 1\n1 2\n")
    res = run("tile-check", str(good))
    assert res.exit_code == 0 and res.output.startswith("tileable: 1")
    bad = tmp_path / "l.txt"
    bad.write_text("1 1\n1 4\n")
    res = run("tile-check", str(bad))
    assert res.exit_code == 0 and "not tileable" in res.output


def test_cli_wellcover():
    res = run("wellcover", "--points", "3,5,40", "--n", "60")
    assert res.exit_code == 0 and "total" in res.output


def test_cli_requires_C():
    res = run("switch-mc", "--m", "3", "--trials", "2")
    assert res.exit_code == 2 and "C must be given" in res.output


def test_cli_switch_mc_and_sampling_failure():
    res = run("switch-mc", "--C", "1", "--m", "3", "--delta", "2", "--R", "2", "--k", "0",
              "--max-per-super", "10", "--min-per-pair", "0", "--trials", "3", "--t", "1")
    assert res.exit_code == 0, res.output
    assert json.loads(res.output)["aggregate"]["failed"]["trials"] == 3
    res = run("sample", "--partial", "--C", "1", "--m", "3", "--delta", "2", "--R", "2",
              "--k", "1", "--max-per-super", "0", "--min-per-pair", "0")
    assert res.exit_code == 3


def test_cli_pipeline_exit_codes():
    assert run("pipeline", "--C", "1", "--d", "1").exit_code == 0
    res = run("pipeline", "--C", "1", "--d", "2")
    assert res.exit_code == 2 and "exhausted at round 2" in res.output


def test_cli_check_proof(tmp_path, depth3_proof):
    path = tmp_path / "p.txt"
    path.write_text(depth3_proof.to_text())
    ok = run("check-proof", str(path), "--php", "11", "--depth", "3")
    assert ok.exit_code == 0 and "valid: 20 lines" in ok.output
    bad = run("check-proof", str(path), "--php", "11", "--depth", "2")
    assert bad.exit_code == 2 and "line 9" in bad.output
