import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from ssns.grid import GridError, RadialGrid, cheb_diff, cheb_nodes, clenshaw_curtis_weights, gauss_legendre


@given(st.integers(1, 4), st.floats(0.3, 3.0))
def test_gaussian_moments_in_every_dimension(n, w):
    g = RadialGrid(dim=n)
    val = g.integrate_radial(np.exp(-g.r**2 / (4 * w)))
    assert abs(val / (4 * math.pi * w) ** (n / 2) - 1) < 1e-10


@pytest.mark.parametrize("n", [1, 2, 3, 4])
def test_second_moment(n):
    g = RadialGrid(dim=n)
    val = g.integrate_radial(g.r**2 * np.exp(-g.r**2))
    assert abs(val / (n / 2 * math.pi ** (n / 2)) - 1) < 1e-11


def test_algebraic_tail_converges_under_refinement():
    # poles at r = +-i sit close to the mapped real axis: slow at order 95, exact by 191
    errs = []
    for order in (95, 191):
        g = RadialGrid(order, dim=3)
        errs.append(abs(g.integrate_radial((1 + g.r**2) ** -3) - math.pi**2 / 4))
    assert errs[0] < 1e-6 and errs[1] < 1e-12


@given(st.floats(0.0, 1e4))
def test_map_round_trip(r):
    g = RadialGrid()
    assert abs(g.to_radius(g.from_radius(r)) - r) <= 1e-10 * max(1.0, r)


def test_nodes_are_positive_and_increasing():
    g = RadialGrid()
    assert g.r[0] > 0 and np.all(np.diff(g.r) > 0)
    assert g.size == (g.order - 1) // 2


@pytest.mark.parametrize("kw", [{"order": 96}, {"order": 13}, {"map_scale": -1.0}, {"dim": 0}])
def test_bad_grids_are_rejected(kw):
    with pytest.raises(GridError):
        RadialGrid(**kw)


def test_even_and_odd_derivatives():
    g = RadialGrid()
    r = g.r
    f = np.exp(-r**2 / 4)
    d1, d2 = g.diff(+1)
    np.testing.assert_allclose(d1 @ f, -r / 2 * f, atol=1e-10)
    np.testing.assert_allclose(d2 @ f, (r**2 / 4 - 0.5) * f, atol=1e-10)
    h = r * f
    d1, d2 = g.diff(-1)
    np.testing.assert_allclose(d1 @ h, (1 - r**2 / 2) * f, atol=1e-10)
    np.testing.assert_allclose(d2 @ h, (r**3 / 4 - 1.5 * r) * f, atol=1e-10)


def test_chebyshev_derivative_of_polynomial():
    x = cheb_nodes(16)
    np.testing.assert_allclose(cheb_diff(16) @ x**5, 5 * x**4, atol=1e-11)


def test_clenshaw_curtis_exact_for_polynomials():
    x = cheb_nodes(20)
    w = clenshaw_curtis_weights(20)
    for k in range(0, 20, 2):
        assert abs(w @ x**k - 2 / (k + 1)) < 1e-13


def test_gauss_legendre():
    x, w = gauss_legendre(10)
    assert abs(w @ x**18 - 2 / 19) < 1e-14


@pytest.mark.parametrize("parity", [1, -1])
def test_interpolation(parity):
    g = RadialGrid()
    f = lambda r: r ** (1 if parity < 0 else 0) * np.exp(-r**2 / 6)
    targets = np.array([0.0, 0.37, 1.9, 7.3, 15.0])
    np.testing.assert_allclose(g.interpolation_matrix(targets, parity) @ f(g.r), f(targets), atol=1e-10)


def test_refined_grid_stays_odd():
    assert RadialGrid(95).refined(1.5).order % 2 == 1
