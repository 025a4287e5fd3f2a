"""Staged runs: ordering, manifests and bitwise reproducibility."""
import json
from pathlib import Path

import pytest

from ssns.config import parse_config
from ssns.pipeline import ORDER, StageError, check_stages, run_pipeline

SMALL = "seed = 5\ngrid.n = 47\ngrid.lmax = 4\ncontinue.target = 0.1\ncontinue.step = 0.05\n"


def _all_files(root: Path):
    return sorted(str(p.relative_to(root)) for p in root.rglob("*") if p.is_file())


@pytest.mark.parametrize("stages", [["model"], ["profile", "spectrum"], list(ORDER), list(ORDER[1:4])])
def test_valid_orders(stages):
    assert check_stages(stages) == stages


@pytest.mark.parametrize("stages", [[], ["spectrum"], ["profile", "track"], ["model", "spectrum"],
                                    ["spectrum", "profile"]])
def test_invalid_orders(stages, tmp_path):
    with pytest.raises(ValueError):
        check_stages(stages)
    with pytest.raises(ValueError):
        run_pipeline(parse_config("seed = 0"), stages, tmp_path)


@pytest.fixture(scope="module")
def two_runs(tmp_path_factory):
    cfg = parse_config(SMALL)
    outs = [tmp_path_factory.mktemp(f"run{k}") for k in range(2)]
    manifests = [run_pipeline(cfg, ["profile", "spectrum"], out) for out in outs]
    return outs, manifests


def test_stable_profile_has_negative_abscissa(two_runs):
    _, (manifest, _) = two_runs
    assert manifest.summaries()["spectrum"]["abscissa_s"] < 0
    assert manifest.error is None


def test_identical_config_gives_identical_bytes(two_runs):
    (a, b), _ = two_runs
    assert _all_files(a) == _all_files(b)
    for name in _all_files(a):
        if name == "manifest.json":
            continue  # carries wall-clock stage times
        assert (a / name).read_bytes() == (b / name).read_bytes(), name


def test_manifest_lists_every_file(two_runs):
    (a, _), _ = two_runs
    listed = json.loads((a / "manifest.json").read_text())["files"]
    assert sorted(listed) == _all_files(a)


def test_manifest_records_config_hash(two_runs):
    (a, _), (manifest, _) = two_runs
    assert json.loads((a / "manifest.json").read_text())["config_hash"] == parse_config(SMALL).hash
    assert (a / "config.txt").read_text() == parse_config(SMALL).emit()


def test_failure_leaves_partial_manifest(tmp_path):
    cfg = parse_config(SMALL + "ancient.synthetic = false\n")
    with pytest.raises(StageError) as exc:
        run_pipeline(cfg, ["profile", "spectrum", "track", "ancient"], tmp_path)
    assert exc.value.stage == "ancient"
    manifest = json.loads((tmp_path / "manifest.json").read_text())
    assert [s["name"] for s in manifest["stages"]] == ["profile", "spectrum", "track"]
    assert manifest["error"].startswith("ancient")
    assert set(json.loads((tmp_path / "summary.json").read_text())) == {"profile", "spectrum", "track"}
