import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import swirl_gaussian_lp
from ssns.acceptance import random_solenoidal
from ssns.fields import VectorField, divergence, projector, synthesize
from ssns.norms import grad_lp_norm, inner, lp_norm, x_norm, zT_seminorm
from ssns.operators import Background, KOperator, bilinear, nonlinear, transport

seeds = st.integers(0, 2**31 - 1)


def swirl(grid):
    c = np.zeros((2, grid.lmax, grid.nr))
    r = grid.radial.r
    c[1, 0] = r * np.exp(-r**2 / 4)  # u_phi = r exp(-r^2/4) sin(theta)
    return VectorField(grid, c)


@pytest.mark.parametrize("p", [2, 4])
def test_lp_norm_against_closed_form(grid, p):
    assert abs(lp_norm(swirl(grid), p) / swirl_gaussian_lp(p) - 1) < 1e-12


def test_swirl_gradient_norm(grid):
    # |grad u|^2 for u = f(r) sin(theta) e_phi integrates to 8 pi/3 int (f'^2 r^2 + 2 f^2) dr
    from scipy.integrate import quad

    f = lambda r: r * np.exp(-r**2 / 4)
    df = lambda r: (1 - r**2 / 2) * np.exp(-r**2 / 4)
    exact = np.sqrt(8 * np.pi / 3 * quad(lambda r: df(r) ** 2 * r**2 + 2 * f(r) ** 2, 0, np.inf)[0])
    assert abs(grad_lp_norm(swirl(grid), 2) / exact - 1) < 1e-10


@given(seeds)
def test_synthesized_fields_are_solenoidal(small_grid, seed):
    g = small_grid
    u, ur, ut = synthesize(g, random_solenoidal(np.random.default_rng(seed), g).coeffs, True)
    scale = np.abs(ur).max()
    assert np.abs(divergence(g, u, ur, ut)).max() <= 1e-9 * scale


@given(seeds)
def test_projection_is_idempotent(small_grid, seed):
    f = random_solenoidal(np.random.default_rng(seed), small_grid)
    back = projector(small_grid)(f.components())
    assert np.abs(back.coeffs - f.coeffs).max() <= 1e-9 * np.abs(f.coeffs).max()


def test_projection_removes_gradients():
    """grad(z exp(-r^2/4)) projects to a discretization error that shrinks under refinement."""
    from ssns.fields import SimilarityGrid
    from ssns.grid import RadialGrid

    errs = []
    for order in (95, 191):
        g = SimilarityGrid(RadialGrid(order), 4)
        r = g.radial.r[:, None]
        mu = g.mu[None, :]
        f = r * np.exp(-r**2 / 4)
        df = (1 - r**2 / 2) * np.exp(-r**2 / 4)
        comps = np.stack([df * mu, -f / r * np.sqrt(1 - mu**2), 0 * f * mu])
        errs.append(x_norm(projector(g)(comps)))
    assert errs[0] < 1e-5 and errs[1] < errs[0] / 4


@given(seeds, st.floats(-5, 5))
def test_norms_are_homogeneous(small_grid, seed, c):
    f = random_solenoidal(np.random.default_rng(seed), small_grid)
    for p in (2, 4):
        assert abs(lp_norm(f * c, p) - abs(c) * lp_norm(f, p)) <= 1e-12 * (1 + lp_norm(f, p))


def test_inner_matches_l2(grid):
    f = random_solenoidal(np.random.default_rng(1), grid)
    assert abs(inner(f, f).real / lp_norm(f, 2) ** 2 - 1) < 1e-12


@given(seeds)
def test_nonlinearity_conserves_energy(grid, seed):
    f = random_solenoidal(np.random.default_rng(seed), grid) * 0.3
    n = nonlinear(f)
    assert abs(inner(f, n)) <= 1e-8 * lp_norm(f, 2) * lp_norm(n, 2)


@given(seeds)
def test_transport_by_solenoidal_field_is_skew(grid, seed):
    rng = np.random.default_rng(seed)
    a, phi = random_solenoidal(rng, grid), random_solenoidal(rng, grid)
    adv = bilinear(a, phi)
    assert abs(inner(phi, adv)) <= 1e-8 * lp_norm(phi, 2) * lp_norm(adv, 2)


def test_k_operator_matrix_matches_action(small_grid):
    rng = np.random.default_rng(5)
    a = Background.from_field(random_solenoidal(rng, small_grid))
    k = KOperator(a)
    phi = random_solenoidal(rng, small_grid)
    np.testing.assert_allclose(k.matrix() @ phi.flat, transport(a, phi).flat, atol=1e-12)


def test_zero_background(small_grid):
    k = KOperator(Background.zero(small_grid))
    assert not np.any(k.matrix())


def test_zt_seminorm():
    assert zT_seminorm([0.25, 1.0], [1.0, 0.5], [2.0, 0.1]) == 2.0
    with pytest.raises(ValueError):
        zT_seminorm([0.0], [1.0], [1.0])


def test_nonfinite_fields_are_rejected(small_grid):
    c = np.zeros((2, small_grid.lmax, small_grid.nr))
    c[0, 0, 0] = np.nan
    with pytest.raises(ValueError):
        VectorField(small_grid, c)
