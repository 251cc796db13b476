import json

import pytest
from click.testing import CliRunner

from expsig.cli import main

SMALL_INFILL = """
kind: infill
seed: 21
process: {type: bm, d: 2}
words: ["1.2"]
n_paths: 60
infill: {levels: [3, 4], reference_level: 6, statistic: signature}
"""


@pytest.fixture()
def runner():
    return CliRunner()


def test_infill_subcommand_writes_artifacts(tmp_path, runner):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(SMALL_INFILL)
    out = tmp_path / "out"
    result = runner.invoke(main, ["infill", "--config", str(cfg), "--out", str(out)])
    assert result.exit_code == 0, result.output
    summary = json.loads((out / "summary.json").read_text())
    assert summary["kind"] == "infill"
    assert "config_hash" in summary and "version" in summary
    csv_text = (out / "samples.csv").read_text()
    assert csv_text.startswith("# config=")
    assert csv_text.splitlines()[1] == "level,word,rms_error"
    assert (out / "plot.svg").read_text().startswith("<svg")


def test_repeat_runs_are_byte_identical(tmp_path, runner):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(SMALL_INFILL)
    a, b = tmp_path / "a", tmp_path / "b"
    assert runner.invoke(main, ["infill", "--config", str(cfg), "--out", str(a)]).exit_code == 0
    r = runner.invoke(
        main, ["infill", "--config", str(cfg), "--out", str(b), "--threads", "7"]
    )
    assert r.exit_code == 0
    assert (a / "summary.json").read_bytes() == (b / "summary.json").read_bytes()
    assert (a / "samples.csv").read_bytes() == (b / "samples.csv").read_bytes()
    assert (a / "plot.svg").read_bytes() == (b / "plot.svg").read_bytes()


def test_seed_flag_overrides_config(tmp_path, runner):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(SMALL_INFILL)
    a, b = tmp_path / "a", tmp_path / "b"
    runner.invoke(main, ["infill", "--config", str(cfg), "--out", str(a)])
    runner.invoke(main, ["infill", "--config", str(cfg), "--out", str(b), "--seed", "99"])
    sa = json.loads((a / "summary.json").read_text())
    sb = json.loads((b / "summary.json").read_text())
    assert sa["seed"] == 21 and sb["seed"] == 99
    assert sa["config_hash"] != sb["config_hash"]


def test_missing_seed_is_config_error(tmp_path, runner):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text('kind: infill\nwords: ["1.1"]\n')
    result = runner.invoke(main, ["infill", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert result.exit_code == 2


def test_kind_mismatch_is_config_error(tmp_path, runner):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("kind: clt\nseed: 1\n")
    result = runner.invoke(main, ["infill", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert result.exit_code != 0


def test_invalid_field_is_config_error(tmp_path, runner):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text('kind: infill\nseed: 1\nwords: ["1.1.1.1.1"]\nK: 4\n')
    result = runner.invoke(main, ["infill", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert result.exit_code == 2


def test_numeric_failure_exit_code(tmp_path, runner):
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text(
        'kind: infill\nseed: 1\nwords: ["1.1"]\nn_paths: 5\nprocess: {type: heston}\n'
    )
    result = runner.invoke(main, ["infill", "--config", str(cfg), "--out", str(tmp_path / "o")])
    assert result.exit_code == 1


def test_selftest(runner):
    result = runner.invoke(main, ["selftest"])
    assert result.exit_code == 0, result.output
    assert "selftest ok" in result.output


def test_colreg_without_config_uses_defaults_with_seed(tmp_path, runner):
    out = tmp_path / "out"
    cfg = tmp_path / "cfg.yaml"
    cfg.write_text("seed: 2\ncolreg: {reps: 200}\n")
    result = runner.invoke(main, ["colreg", "--config", str(cfg), "--out", str(out)])
    assert result.exit_code == 0, result.output
    csv = (out / "samples.csv").read_text()
    assert csv.splitlines()[0].startswith("# config=")
    assert csv.splitlines()[1] == "sigma,rho,dependence,estimator,rmse,percent_of_ols,paired_tstat_vs_ols"
