import numpy as np
from hypothesis import given, strategies as st

from ssns.acceptance import random_solenoidal
from ssns.fields import ScalarField
from ssns.grid import RadialGrid
from ssns.norms import lp_norm
from ssns.scaling import from_similarity, scaling_exponent, to_similarity

times = st.floats(1e-3, 1e2)


@given(st.integers(1, 3), st.floats(1.1, 6.0), st.floats(0.0, 2.0), times)
def test_lp_scaling_identity(n, p, alpha, t):
    g = RadialGrid(dim=n)
    phi = ScalarField(g, np.exp(-g.r**2 / 3) * (1 + g.r**2), 0)
    u = from_similarity(phi, t, alpha)
    assert abs(lp_norm(u, p) / (t ** scaling_exponent(n, p, alpha) * lp_norm(phi, p)) - 1) < 1e-10


@given(times, st.floats(0.0, 2.0))
def test_scalar_round_trip(t, alpha):
    g = RadialGrid()
    phi = ScalarField(g, np.exp(-g.r**2 / 3), 0)
    back = to_similarity(from_similarity(phi, t, alpha), t, alpha)
    np.testing.assert_allclose(back.values, phi.values, rtol=1e-13)
    np.testing.assert_allclose(back.grid.r, g.r, rtol=1e-13)


@given(times, st.sampled_from([2.0, 4.0]))
def test_vector_scaling(t, p, ):
    from ssns.fields import SimilarityGrid

    grid = SimilarityGrid(RadialGrid(47), 3)
    phi = random_solenoidal(np.random.default_rng(3), grid)
    u = from_similarity(phi, t)
    assert abs(lp_norm(u, p) / (t ** scaling_exponent(3, p, 1.0) * lp_norm(phi, p)) - 1) < 1e-10
    back = to_similarity(u, t)
    np.testing.assert_allclose(back.coeffs, phi.coeffs, rtol=1e-12, atol=1e-15)


def test_critical_exponents():
    assert scaling_exponent(3, 3.0, 1.0) == 0.0
    assert scaling_exponent(3, 2.0, 1.0) == 0.25
    assert scaling_exponent(3, 4.0, 1.0) == -0.125
