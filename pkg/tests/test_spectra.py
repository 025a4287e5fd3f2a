"""Leading spectrum, growth bound and crossing classification."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ssns.ancient import scenario_a_operator
from ssns.spectra import (EigenCurve, LinearizedOperator, classify_crossing, gaussian_mode, growth_bound,
                          leading_spectrum, planted_operator)


def test_gaussian_modes_are_eigenfields(grid):
    drift = LinearizedOperator.drift(grid)
    for comp, l in [(1, 1), (0, 1), (1, 2), (0, 2)]:
        v, lam = gaussian_mode(grid, comp, l)
        assert np.linalg.norm(drift.apply(v) - lam * v) < 1e-8


def test_drift_leading_value(small_grid):
    rep = leading_spectrum(None, 4, grid=small_grid)
    # above the band only the swirl mode survives, at -3/2 it is already in the band
    assert rep.abscissa_s <= -0.25 + 1e-9


@settings(max_examples=6)
@given(beta=st.floats(0.005, 1 / 32), omega=st.floats(0.1, 0.5))
def test_planted_pair_recovered(grid, beta, omega):
    op = scenario_a_operator(grid, beta, omega)
    rep = leading_spectrum(op, 4)
    lam = rep.leading.value
    assert abs(lam.real - beta) < 1e-8
    assert abs(abs(lam.imag) - omega) < 1e-8
    assert rep.leading.residual < 1e-6


def test_planted_real_value(grid):
    op = planted_operator(grid, [[0.1]])
    assert abs(leading_spectrum(op, 3).leading.value - 0.1) < 1e-8


def test_spectrum_closed_under_conjugation(small_grid):
    vals = leading_spectrum(scenario_a_operator(small_grid), 6).values
    for v in vals[np.abs(vals.imag) > 1e-8]:
        assert np.min(np.abs(vals - np.conj(v))) < 1e-6


def test_growth_bound_of_pure_drift(grid):
    assert growth_bound(None, grid=grid) == pytest.approx(-0.25, abs=0.02)


def test_growth_bound_matches_planted_abscissa(small_grid):
    op = planted_operator(small_grid, [[0.02]])
    assert growth_bound(op) == pytest.approx(0.02, abs=0.02)


def test_growth_bound_rejects_short_horizon(small_grid):
    with pytest.raises(ValueError):
        growth_bound(None, horizon=5, grid=small_grid)


def test_too_many_values_refused(small_grid):
    with pytest.raises(ValueError):
        leading_spectrum(None, 21, grid=small_grid)


def test_profile_abscissa_negative(profile_01):
    rep = leading_spectrum(profile_01.background(), 4)
    assert rep.abscissa_s < 0


def _curve(kind):
    s = np.linspace(0.0, 2.0, 21)
    if kind == "A":
        return EigenCurve.from_values(s, 0.1 * (s - 1.0) + 0.3j)
    return EigenCurve.from_values(s, (s - 1.0) + 0j, fold={"sigma": 1.0})


def test_classify_complex_crossing():
    cert = classify_crossing(_curve("A"))
    assert cert.kind == "A"
    assert cert.sigma0 == pytest.approx(1.0, abs=1e-9)
    assert cert.transversality == pytest.approx(0.1)


def test_classify_fold():
    assert classify_crossing(_curve("B")).kind == "B"


def test_classify_none_has_diagnostics():
    s = np.linspace(0, 1, 5)
    cert = classify_crossing(EigenCurve.from_values(s, -1 - s + 0j))
    assert cert.kind == "none" and cert.diagnostics


def test_tangential_complex_crossing_is_not_a():
    s = np.linspace(0, 2, 21)
    cert = classify_crossing(EigenCurve.from_values(s, -0.1 * (s - 1.0) + 0.3j))
    assert cert.kind == "none"
