"""Command-line entry point: outputs and exit codes."""
import json

import pytest

from ssns.cli import EXIT_ACCEPTANCE, EXIT_CONFIG, EXIT_NUMERIC, EXIT_OK, main
from ssns.io import read_csv, read_jsonl

SMALL = ["--set", "grid.n=47", "--set", "grid.lmax=4"]


def _run(tmp_path, *argv):
    return main(list(argv) + ["--out", str(tmp_path)])


def test_model_sweep_csv(tmp_path):
    assert _run(tmp_path, "model", "--kappa-sweep", "0:1:0.5", "--p", "2,4") == EXIT_OK
    head, rows = read_csv(tmp_path / "model_sweep.csv")
    assert head[0] == "kappa" and len(rows) == 3 * 2


def test_profile_then_spectrum(tmp_path):
    assert _run(tmp_path, "profile", "--sigma", "0.1", *SMALL) == EXIT_OK
    meta = json.loads((tmp_path / "profile.json").read_text())
    assert meta["converged"] and meta["sigma"] == 0.1
    assert _run(tmp_path, "spectrum", "--profile", str(tmp_path / "profile.ssns"), "--count", "4") == EXIT_OK
    head, rows = read_csv(tmp_path / "spectrum.csv")
    assert "re" in head and len(rows) >= 4


def test_continue_writes_branch(tmp_path):
    assert _run(tmp_path, "continue", "--to", "0.1", "--step", "0.05", *SMALL) == EXIT_OK
    assert [round(r["sigma"], 12) for r in read_jsonl(tmp_path / "branch.jsonl")] == [0.0, 0.05, 0.1]


def test_semigroup_of_drift(tmp_path):
    assert _run(tmp_path, "semigroup", "--time", "0.5", "--step", "0.05", *SMALL) == EXIT_OK
    _, rows = read_csv(tmp_path / "semigroup_norms.csv")
    assert len(rows) >= 2


def test_bad_config_value(tmp_path):
    assert _run(tmp_path, "profile", "--set", "grid.n=-4") == EXIT_CONFIG


def test_unknown_key_and_missing_file(tmp_path):
    assert _run(tmp_path, "profile", "--set", "grid.size=3") == EXIT_CONFIG
    assert _run(tmp_path, "profile", "--config", str(tmp_path / "nope.cfg")) == EXIT_CONFIG


def test_config_without_seed(tmp_path):
    cfg = tmp_path / "run.cfg"
    cfg.write_text("grid.n = 47\n")
    assert _run(tmp_path, "profile", "--config", str(cfg)) == EXIT_CONFIG
    assert _run(tmp_path, "profile", "--config", str(cfg), "--seed", "2", "--set", "grid.lmax=4") == EXIT_OK


def test_invalid_stage_order(tmp_path):
    assert _run(tmp_path, "run", "--stages", "spectrum") == EXIT_CONFIG
    assert _run(tmp_path, "run", "--stages", "model,spectrum") == EXIT_CONFIG


def test_numerical_failure(tmp_path):
    # a stable profile has no unstable pair to build an ancient solution on
    assert _run(tmp_path, "profile", "--sigma", "0.1", *SMALL) == EXIT_OK
    assert _run(tmp_path, "ancient", "--profile", str(tmp_path / "profile.ssns")) == EXIT_NUMERIC


def test_failed_criterion(tmp_path, capsys):
    assert _run(tmp_path, "verify", "--criteria", "1") == EXIT_ACCEPTANCE
    out = capsys.readouterr().out
    assert "criterion  1" in out
    results = {r["number"]: r for r in json.loads((tmp_path / "verify.json").read_text())}
    assert results[1]["passed"] is False and results[13]["passed"] is True


def test_passing_criterion(tmp_path):
    assert _run(tmp_path, "verify", "--criteria", "4") == EXIT_OK


def test_run_model_stage_manifest(tmp_path):
    assert _run(tmp_path, "run", "--stages", "model") == EXIT_OK
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert manifest["stages"][0]["name"] == "model"
    assert manifest["stages"][0]["summary"]["hermite_pass"] is True


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
    assert "ssns" in capsys.readouterr().out
