import json
import math

import pytest

from quenchwall.errors import InvalidInput
from quenchwall.harness.cli import main
from quenchwall.harness.config import CONFIG_SCHEMA, ExperimentConfig
from quenchwall.harness.runner import replay, run_experiment
from quenchwall.harness.validate import bias_detector
from quenchwall.engine.grid import GridConfig

SMALL = dict(name="small", process="bm", wall={"kind": "scaled-brownian", "grid": "graded"}, beta=1.0,
             horizon_min=4.0, horizon_max=64.0, n_walls=3, seed=77, dx=0.04)


def _small(**kw):
    return ExperimentConfig(**{**SMALL, **kw})


def test_config_yaml_roundtrip_and_digest():
    cfg = _small(window=[0.0, math.inf])
    back = ExperimentConfig.from_yaml(cfg.to_yaml())
    assert back == cfg
    assert back.digest() == cfg.digest()
    assert cfg.to_dict()["schema"] == CONFIG_SCHEMA
    assert cfg.with_overrides(out_dir="elsewhere").digest() == cfg.digest()
    assert cfg.with_overrides(seed=78).digest() != cfg.digest()


@pytest.mark.parametrize("bad", [
    dict(process="levy"), dict(estimator="kingman"), dict(n_walls=0), dict(seed=-1),
    dict(gate={"ci_sideways": 1}), dict(horizons=[4.0, 2.0]), dict(dx=0.0),
])
def test_config_validation(bad):
    with pytest.raises(InvalidInput):
        _small(**bad)


def test_config_rejects_unknown_keys_and_schema():
    with pytest.raises(InvalidInput):
        ExperimentConfig.from_dict({"colour": "red"})
    with pytest.raises(InvalidInput):
        ExperimentConfig.from_dict({"schema": "other/9"})
    with pytest.raises(InvalidInput):
        ExperimentConfig.from_yaml("- just a list")


def test_run_is_deterministic_and_independent_of_jobs():
    cfg = _small()
    a = run_experiment(cfg)
    b = run_experiment(cfg)
    c = run_experiment(cfg, jobs=2)
    assert a.curves_csv() == b.curves_csv() == c.curves_csv()
    assert a.aggregate.ci95 == c.aggregate.ci95


def test_single_wall_is_degenerate():
    rec = run_experiment(_small(n_walls=1))
    assert rec.aggregate.n_walls == 1
    assert rec.aggregate.ci95[0] == rec.aggregate.ci95[1] == rec.aggregate.mean


def test_save_and_replay(tmp_path):
    rec = run_experiment(_small())
    path = rec.save(tmp_path)
    for name in ("config.yaml", "curves.csv", "results.jsonl", "record.json"):
        assert (path / name).exists()
    again, identical = replay(path)
    assert identical and again.curves_csv() == rec.curves_csv()
    stored = json.loads((path / "record.json").read_text())
    stored["config"]["seed"] = 1
    (path / "record.json").write_text(json.dumps(stored))
    with pytest.raises(InvalidInput):
        replay(path)


def _write_config(tmp_path, **kw):
    p = tmp_path / "cfg.yaml"
    p.write_text(_small(**kw).to_yaml())
    return p


def test_cli_simulate_exit_codes(tmp_path, capsys):
    cfg = _write_config(tmp_path)
    assert main(["simulate", "--config", str(cfg), "--walls", "2", "--out", str(tmp_path / "o")]) == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["schema"] == "quenchwall.summary/1" and summary["n_walls"] == 2
    gated = _write_config(tmp_path, gate={"ci_contains": 100.0})
    assert main(["simulate", "--config", str(gated), "--out", str(tmp_path / "o")]) == 1
    assert main(["simulate", "--config", str(tmp_path / "missing.yaml")]) == 2
    assert main(["simulate", "--seed", "-4"]) == 2
    assert main(["simulate", "--window", "1"]) == 2
    assert main(["nonsense"]) == 2


def test_cli_default_output_directory(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("QUENCHWALL_OUT", str(tmp_path / "env-out"))
    cfg = _write_config(tmp_path)
    assert main(["simulate", "--config", str(cfg), "--walls", "1"]) == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["record"].startswith(str(tmp_path / "env-out"))
    assert main(["replay", summary["record"]]) == 0
    assert json.loads(capsys.readouterr().out)["identical"] is True


def test_cli_exponent_spectral_tilt(tmp_path, capsys):
    rec = run_experiment(_small())
    path = rec.save(tmp_path)
    out = tmp_path / "fits"
    assert main(["exponent", str(path / "curves.csv"), "--correction", "1", "--out", str(out)]) == 0
    lines = (out / "fits.jsonl").read_text().splitlines()
    assert len(lines) == 4 and all('"schema"' in line for line in lines)
    assert main(["spectral", "--mu1", "1", "--mu2", "1", "--beta", "0.5", "--L", "4", "--h", "0.1"]) == 0
    assert "quenchwall.spectral/1" in capsys.readouterr().out
    assert main(["spectral", "--mu1", "0"]) == 2
    assert main(["tilt", "--family", "two-point", "--points", "9"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["schema"] == "quenchwall.tilt/1" and doc["bracket_holds"]
    assert main(["exponent", str(tmp_path / "nothing.csv")]) == 2


def test_bias_detector_flags_missing_bridge():
    assert bias_detector().passed
    assert not bias_detector(GridConfig(bridge=False)).passed
