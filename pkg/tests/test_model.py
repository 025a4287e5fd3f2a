import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import channel_eigenvalue, hermite_spectrum
from ssns.acceptance import hermite_reference
from ssns.grid import RadialGrid
from ssns.model import (ModelOperator, ModelPotential, channels, eigen_seeded_datum, model_spectrum,
                        multiplicity, simulate_potential_heat, strength_for_eigenvalue, threshold_classify,
                        threshold_sweep)


@pytest.mark.parametrize("n", [1, 3])
def test_reference_table_matches_symbolic_oracle(n):
    assert [float(v) for v in hermite_spectrum(n)] == list(hermite_reference(n))


@pytest.mark.parametrize("n", [1, 3])
def test_free_spectrum_matches_gaussian_derivatives(n):
    vals = model_spectrum(ModelPotential(n, 0.0), how_many=40).values
    assert np.abs(vals.imag).max() < 1e-8
    for e in hermite_spectrum(n):
        assert np.abs(vals.real - float(e)).min() < 1e-6


@pytest.mark.parametrize("n,l", [(3, 0), (3, 1), (3, 2), (3, 4), (1, 0), (1, 1)])
def test_each_channel_against_laguerre_modes(n, l):
    w, _ = ModelOperator(ModelPotential(n, 0.0), RadialGrid(dim=n), l, conjugated=True).eig()
    expect = [float(channel_eigenvalue(n, l, j)) for j in range(4)]
    np.testing.assert_allclose(np.sort(w.real)[::-1][:4], expect, atol=1e-8)


def test_multiplicities():
    assert [multiplicity(3, l) for l in range(4)] == [1, 3, 5, 7]
    assert multiplicity(1, 1) == 1
    assert channels(1) == [0, 1]


@pytest.mark.parametrize("p,expected", [(1.2, "illposed_expected"), (1.5, "marginal"), (2.0, "wellposed_expected")])
def test_threshold_classify(p, expected):
    assert threshold_classify(3, 2.0, p) == expected


def test_threshold_classify_rejects_bad_input():
    with pytest.raises(ValueError):
        threshold_classify(3, 2.0, 1.0)


def test_positive_strength_raises_the_ground_state():
    base = ModelOperator(ModelPotential(3, 0.0), l=0, conjugated=True).eig()[0][0].real
    well = ModelOperator(ModelPotential(3, 1.0), l=0, conjugated=True).eig()[0][0].real
    assert well > base


def test_strength_hits_target_eigenvalue():
    k = strength_for_eigenvalue(-1.0, 3)
    lead = ModelOperator(ModelPotential(3, k), l=0, conjugated=True).eig()[0][0].real
    assert abs(lead + 1.0) < 1e-10


def test_eigen_seeded_norms_follow_exact_power_law():
    """||u(t)||_p = t^(lambda + n/2p) ||phi||_p when u is seeded by an eigenfunction."""
    pot = ModelPotential(3, strength_for_eigenvalue(-1.0, 3))
    lam, u0 = eigen_seeded_datum(pot, 1.0)
    run = simulate_potential_heat(pot, u0, [1.2, 2.0, 4.0], np.logspace(0, 2, 12))
    for p in (2.0, 4.0):
        assert abs(run.exponent(p) - (lam + 3 / (2 * p))) < 1e-9
    # L^1.2 weights the far tail, where round-off seeds slowly decaying modes
    assert abs(run.exponent(1.2) - (lam + 3 / 2.4)) < 1e-3


def test_potential_is_singular_at_zero():
    pot = ModelPotential(3, 0.0)
    _, u0 = eigen_seeded_datum(pot, 1.0)
    with pytest.raises(ValueError):
        simulate_potential_heat(pot, u0, [2.0], [0.0, 1.0])


def test_sweep_rows_are_consistent():
    rows = threshold_sweep(3, 2.0, [0.0, 1.0], [1.2, 2.0])
    assert len(rows) == 4
    for r in rows:
        # each strength sets its own alpha = -2 lambda1
        assert r.classification == threshold_classify(3, -2 * r.lambda1, r.p)
        if r.p == 2.0:
            assert abs(r.fitted_exponent - (r.lambda1 + 3 / 4)) < 1e-8
        assert r.observed == ("growth" if r.fitted_exponent > 0 else "decay")


@given(st.integers(1, 5), st.floats(0.2, 4.0), st.floats(1.01, 10.0))
def test_classification_is_monotone_in_p(n, alpha, p):
    crit = n / alpha
    label = threshold_classify(n, alpha, p)
    if p < crit * (1 - 1e-6):
        assert label == "illposed_expected"
    elif p > crit * (1 + 1e-6):
        assert label == "wellposed_expected"
