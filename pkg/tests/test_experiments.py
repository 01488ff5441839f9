import json

import pytest

from envwalk.cli import main as cli_main
from envwalk.experiments import (
    ConfigError,
    emit,
    parse_config,
    report_json,
    run,
)


def test_parse_types_and_defaults():
    cfg = parse_config("experiment = variance-scan\nn_grid = 4, 8, 16, 32\nenv_replicas = 50\n")
    assert cfg.experiment == "variance-scan"
    assert cfg.values["n_grid"] == [4, 8, 16, 32]
    assert cfg.values["env_replicas"] == 50
    assert cfg.values["seed"] == 20100308  # documented default
    assert cfg.values["mean_method"] == "exact"


def test_parse_comments_and_floats():
    cfg = parse_config("# a comment\nexperiment = fclt\nepsilon = 0.0009765625  # 2^-10\n")
    assert cfg.values["epsilon"] == 2.0**-10


def test_unknown_key_rejected_by_name():
    with pytest.raises(ConfigError, match="replicsa"):
        parse_config("experiment = phi-decay\nreplicsa = 100\n")


def test_unknown_experiment_and_model_rejected():
    with pytest.raises(ConfigError, match="unknown experiment"):
        parse_config("experiment = nonsense\n")
    with pytest.raises(ConfigError, match="unknown model"):
        parse_config("experiment = moments\nmodel = nonsense\n")


def test_missing_experiment_and_bad_lines():
    with pytest.raises(ConfigError, match="experiment"):
        parse_config("model = mixing-lattice\n")
    with pytest.raises(ConfigError, match="line 2"):
        parse_config("experiment = moments\njust some words\n")
    with pytest.raises(ConfigError, match="duplicate"):
        parse_config("experiment = moments\nseed = 1\nseed = 2\n")


SMALL_VARIANCE = "experiment = variance-scan\nn_grid = 16, 32, 64, 128\nenv_replicas = 300\n"


def test_run_is_deterministic():
    cfg = parse_config(SMALL_VARIANCE)
    a = report_json(run(cfg))
    b = report_json(run(cfg))
    assert a == b


def test_workers_do_not_change_report():
    cfg = parse_config(SMALL_VARIANCE)
    a = report_json(run(cfg, workers=1))
    b = report_json(run(cfg, workers=4))
    assert a == b


def test_seed_override_changes_report():
    cfg = parse_config(SMALL_VARIANCE)
    a = report_json(run(cfg))
    b = report_json(run(cfg, seed=777))
    assert a != b
    assert json.loads(b)["resolved"]["seed"] == 777


def test_report_carries_config_and_metadata(tmp_path):
    cfg = parse_config(SMALL_VARIANCE)
    report = run(cfg)
    doc = json.loads(report_json(report))
    assert doc["config_text"] == SMALL_VARIANCE
    assert doc["resolved"]["seed"] == 20100308
    assert doc["artifact"]["name"] == "envwalk"
    grids = [r["grid"] for r in doc["rows"] if r["name"] == "estimate"]
    assert grids == [16.0, 32.0, 64.0, 128.0]


def test_emit_json_and_csv(tmp_path):
    cfg = parse_config("experiment = moments\nenv_replicas = 5000\n")
    report = run(cfg)
    paths = emit(report, "json", tmp_path)
    assert paths[0].name == "moments_report.json"
    doc = json.loads(paths[0].read_text())
    assert doc["experiment"] == "moments"
    paths = emit(report, "csv", tmp_path)
    rows, verdicts = (p.read_text() for p in paths)
    assert rows.splitlines()[0] == "experiment,section,name,grid,replica,value,se,count,note"
    assert verdicts.splitlines()[0] == "experiment,name,passed,observed,threshold"
    assert len(rows.splitlines()) == len(report.rows) + 1


def test_counterexample_report_contains_both_verdicts():
    cfg = parse_config(
        "experiment = counterexample\nwalk_replicas = 1500\nenv_seeds = 3\npass_seeds = 2\n"
    )
    report = run(cfg)
    names = {v.name for v in report.verdicts}
    assert "velocity_marginals_rejected" in names
    assert "quenched_mean_marginals_gaussian" in names
    assert report.resolved["model"] == "level-correlated"


def test_cli_exit_codes(tmp_path, capsys):
    cfg = tmp_path / "ok.cfg"
    cfg.write_text("experiment = moments\nenv_replicas = 5000\n")
    assert cli_main(["--config", str(cfg), "--out", str(tmp_path)]) == 0
    out = capsys.readouterr().out
    assert "[PASS]" in out and "moments_report.json" in out

    bad = tmp_path / "bad.cfg"
    bad.write_text("experiment = moments\nbogus_key = 1\n")
    assert cli_main(["--config", str(bad), "--out", str(tmp_path)]) == 1
    assert "bogus_key" in capsys.readouterr().err

    # an impossible verdict: eta of the mixing model is ~0.5, demand >= 2
    failing = tmp_path / "fail.cfg"
    failing.write_text(
        "experiment = variance-scan\nn_grid = 16, 32, 64, 128\nenv_replicas = 200\neta_min = 2.0\n"
    )
    assert cli_main(["--config", str(failing), "--out", str(tmp_path)]) == 2
    assert "[FAIL]" in capsys.readouterr().out


def test_cli_csv_format(tmp_path):
    cfg = tmp_path / "c.cfg"
    cfg.write_text("experiment = moments\nenv_replicas = 2000\n")
    assert cli_main(["--config", str(cfg), "--out", str(tmp_path), "--format", "csv"]) == 0
    assert (tmp_path / "moments_rows.csv").exists()
    assert (tmp_path / "moments_verdicts.csv").exists()


def test_csv_schema_ships_with_package():
    import importlib.resources

    text = importlib.resources.files("envwalk").joinpath("csv_schema.txt").read_text()
    for column in ("section", "grid", "replica", "value", "se", "threshold"):
        assert column in text


def test_every_shipped_config_parses(tmp_path):
    from pathlib import Path

    cfg_dir = Path(__file__).parent.parent / "configs"
    names = sorted(p.name for p in cfg_dir.glob("*.cfg"))
    assert len(names) >= 10
    for name in names:
        cfg = parse_config((cfg_dir / name).read_text())
        assert cfg.experiment in name.replace("_", "-") or cfg.experiment.split("-")[0] in name
