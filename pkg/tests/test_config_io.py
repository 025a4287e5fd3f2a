"""Configuration parsing and on-disk formats."""
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ssns.config import KEYS, ConfigError, load_config, parse_config, worker_count
from ssns.datum import DatumError, swirl_datum
from ssns.fields import ScalarField, VectorField
from ssns.grid import RadialGrid
from ssns.io import (SnapshotError, load_datum, load_profile, read_csv, read_snapshot, save_profile, write_csv,
                     write_snapshot)


def test_defaults_fill_every_key():
    cfg = parse_config("seed = 3")
    assert cfg.seed == 3
    assert set(cfg.values) == set(KEYS)
    assert cfg["grid.n"] == 95 and cfg["model.kappas"] == (0.0, 0.5, 1.0, 1.5)


def test_seed_is_mandatory():
    with pytest.raises(ConfigError, match="seed"):
        parse_config("grid.n = 95")


def test_invalid_value_names_the_key():
    with pytest.raises(ConfigError, match="grid.n"):
        parse_config("seed = 0\ngrid.n = -4")


def test_even_order_rejected():
    with pytest.raises(ConfigError, match="grid.n"):
        parse_config("seed = 0\ngrid.n = 96")


def test_unknown_key():
    with pytest.raises(ConfigError, match="grid.size"):
        parse_config("seed = 0\ngrid.size = 3")


def test_malformed_line_and_value():
    with pytest.raises(ConfigError, match="line 2"):
        parse_config("seed = 0\njunk")
    with pytest.raises(ConfigError, match="malformed"):
        parse_config("seed = 0\ngrid.n = many")


def test_criteria_list():
    assert parse_config("seed = 0").criteria() is None
    assert parse_config("seed = 0\nverify.criteria = 4, 5").criteria() == [4, 5]
    with pytest.raises(ConfigError):
        parse_config("seed = 0\nverify.criteria = 0")


def test_comments_ignored():
    assert parse_config("# header\nseed = 1  # trailing\n\n").seed == 1


@settings(max_examples=15)
@given(seed=st.integers(0, 2**31), n=st.integers(8, 60), sigma=st.floats(0, 2, allow_nan=False))
def test_emit_round_trip_preserves_hash(seed, n, sigma):
    cfg = parse_config(f"seed = {seed}\ngrid.n = {2 * n + 1}\nprofile.sigma = {sigma!r}")
    again = parse_config(cfg.emit())
    assert again.values == cfg.values and again.hash == cfg.hash


def test_hash_sees_every_change():
    base = parse_config("seed = 0")
    assert base.with_overrides(["seed = 1"]).hash != base.hash
    assert base.with_overrides(["grid.lmax = 7"]).hash != base.hash
    assert base.with_overrides([]).hash == base.hash


def test_load_config(tmp_path):
    p = tmp_path / "run.cfg"
    p.write_text("seed = 9\nprofile.sigma = 0.2\n")
    assert load_config(p)["profile.sigma"] == 0.2


def test_worker_count(monkeypatch):
    monkeypatch.setenv("SSNS_THREADS", "3")
    assert worker_count() == 3
    monkeypatch.setenv("SSNS_THREADS", "0")
    assert worker_count() == 1


def test_vector_snapshot_round_trip(tmp_path, small_grid):
    rng = np.random.default_rng(0)
    f = VectorField(small_grid, rng.standard_normal((2, small_grid.lmax, small_grid.nr)))
    write_snapshot(tmp_path / "f.ssns", f, 0.25)
    back, t = read_snapshot(tmp_path / "f.ssns")
    assert t == 0.25 and back.grid == f.grid
    assert np.array_equal(back.coeffs, f.coeffs)


def test_complex_and_scalar_snapshots(tmp_path, small_grid):
    rng = np.random.default_rng(1)
    c = VectorField(small_grid, rng.standard_normal((2, small_grid.lmax, small_grid.nr)) * (1 + 2j))
    write_snapshot(tmp_path / "c.ssns", c)
    assert np.array_equal(read_snapshot(tmp_path / "c.ssns")[0].coeffs, c.coeffs)
    rad = RadialGrid(31, 8.0, 3)
    s = ScalarField(rad, rng.standard_normal(rad.size), 2)
    write_snapshot(tmp_path / "s.ssns", s)
    back, _ = read_snapshot(tmp_path / "s.ssns")
    assert back.l == 2 and np.array_equal(back.values, s.values)


def test_corrupt_snapshot(tmp_path, small_grid):
    f = VectorField(small_grid, np.ones((2, small_grid.lmax, small_grid.nr)))
    path = write_snapshot(tmp_path / "f.ssns", f)
    blob = path.read_bytes()
    path.write_bytes(blob[:-8])
    with pytest.raises(SnapshotError):
        read_snapshot(path)
    path.write_bytes(b"XXXX" + blob[4:])
    with pytest.raises(SnapshotError):
        read_snapshot(path)


def test_csv_round_trip_is_exact(tmp_path):
    vals = [0.1, 1 / 3, np.float64(2.0) ** -40]
    write_csv(tmp_path / "a.csv", ("x", "label"), [(v, "k") for v in vals])
    head, rows = read_csv(tmp_path / "a.csv")
    assert head == ["x", "label"]
    assert [float(r[0]) for r in rows] == [float(v) for v in vals]


def test_profile_round_trip(tmp_path, profile_01):
    save_profile(profile_01, tmp_path / "profile")
    back = load_profile(tmp_path / "profile")
    assert back.sigma == profile_01.sigma and back.datum == profile_01.datum
    assert np.array_equal(back.phi.coeffs, profile_01.phi.coeffs)
    assert back.converged


def test_datum_file(tmp_path):
    p = tmp_path / "d.json"
    p.write_text(json.dumps({"p": [0.0, 0.5], "t": [1.0], "label": "mixed"}))
    d = load_datum(str(p))
    assert d.p == (0.0, 0.5) and d.t == (1.0,) and d.label == "mixed"
    assert load_datum("swirl") == swirl_datum()
    p.write_text("[1, 2]")
    with pytest.raises(DatumError):
        load_datum(str(p))
    with pytest.raises(DatumError):
        load_datum(str(tmp_path / "missing.json"))
