import numpy as np
import pytest
import sympy as sp
from hypothesis import given, strategies as st

from oracles import gaussian_derivative_eigenvalue, heat_gaussian
from ssns.acceptance import random_solenoidal
from ssns.fields import ScalarField, VectorField
from ssns.grid import RadialGrid
from ssns.heat import (BandProximityError, HeatResolutionError, PropagatorSpec, Resolvent, decay_fit,
                       drift_operator, heat_evolve, norm_history, phi_functions, semigroup_L, semigroup_La)
from ssns.norms import x_norm
from ssns.operators import Background


def swirl_mode(grid):
    """u = exp(-|y|^2/4) (-y2, y1, 0): Cartesian components are first Gaussian derivatives."""
    c = np.zeros((2, grid.lmax, grid.nr))
    r = grid.radial.r
    c[1, 0] = r * np.exp(-r**2 / 4)
    return VectorField(grid, c)


SWIRL_RATE = float(gaussian_derivative_eigenvalue(3, (1, 0, 0))) + 0.5


@pytest.mark.parametrize("n", [1, 2, 3])
def test_oracle_solves_heat_equation(n):
    w, t = sp.symbols("w t", positive=True)
    u, r = heat_gaussian(n, w, t)
    lap = sp.diff(u, r, 2) + (n - 1) / r * sp.diff(u, r)
    assert sp.simplify(sp.diff(u, t) - lap) == 0


@pytest.mark.parametrize("n", [1, 2, 3])
@pytest.mark.parametrize("t", [0.1, 1.0, 10.0])
def test_gaussian_heat_flow(n, t):
    g = RadialGrid(dim=n)
    w = 0.7
    out = heat_evolve(ScalarField(g, np.exp(-g.r**2 / (4 * w)), 0), t)
    expect = (w / (w + t)) ** (n / 2) * np.exp(-g.r**2 / (4 * (w + t)))
    # the kernel quadrature is checked to a mass defect of 1e-6; at small t it lands near 1e-8
    np.testing.assert_allclose(out.values, expect, atol=1e-7)


def test_dipole_channel_kernel():
    g = RadialGrid(dim=3)
    w, t = 0.5, 2.0
    out = heat_evolve(ScalarField(g, g.r * np.exp(-g.r**2 / (4 * w)), 1), t)
    np.testing.assert_allclose(out.values, (w / (w + t)) ** 2.5 * g.r * np.exp(-g.r**2 / (4 * (w + t))), atol=1e-9)


def test_narrow_kernel_is_flagged():
    g = RadialGrid(dim=3)
    with pytest.raises(HeatResolutionError):
        heat_evolve(ScalarField(g, np.exp(-g.r**2), 0), 1e-7)


def test_swirl_mode_is_an_eigenfield(grid):
    u = swirl_mode(grid)
    assert SWIRL_RATE == -1.5
    lu = drift_operator(grid)(u)
    assert x_norm(lu - u * SWIRL_RATE) < 1e-8
    for s in (0.5, 3.0):
        assert x_norm(semigroup_L(u, s) - u * np.exp(SWIRL_RATE * s)) < 1e-8


# below s ~ 0.2 the kernel of the heat substitution is narrower than the node spacing (flagged)
@given(st.floats(0.2, 2.0), st.floats(0.2, 2.0))
def test_semigroup_property(grid, s1, s2):
    f = random_solenoidal(np.random.default_rng(11), grid)
    both = semigroup_L(f, s1 + s2)
    steps = semigroup_L(semigroup_L(f, s1), s2)
    assert x_norm(both - steps) <= 1e-7 * x_norm(f)


def test_heat_substitution_matches_matrix_exponential(grid):
    f = random_solenoidal(np.random.default_rng(2), grid)
    a = semigroup_L(f, 1.3)
    b = VectorField.from_flat(grid, drift_operator(grid).propagate(f.flat, 1.3))
    assert x_norm(a - b) <= 1e-7 * x_norm(f)


def test_phi_functions_scalar():
    a, h = -0.7, 0.3
    e, p1, p2 = phi_functions(np.array([[a]]), h)
    ez = np.exp(a * h)
    assert abs(e[0, 0] - ez) < 1e-15
    assert abs(p1[0, 0] - (ez - 1) / a) < 1e-14
    assert abs(p2[0, 0] - (ez - 1 - a * h) / (a * a * h)) < 1e-14


def test_etd_step_is_exact_for_linear_forcing():
    """x' = A x + n0 + (n1 - n0) tau / h integrates exactly."""
    rng = np.random.default_rng(0)
    A = rng.standard_normal((4, 4)) - 3 * np.eye(4)
    x0, n0, n1 = rng.standard_normal((3, 4))
    h = 0.4
    e, p1, p2 = phi_functions(A, h)
    from scipy.integrate import solve_ivp

    ref = solve_ivp(lambda t, x: A @ x + n0 + (n1 - n0) * t / h, (0, h), x0, rtol=1e-12, atol=1e-14).y[:, -1]
    np.testing.assert_allclose(e @ x0 + p1 @ n0 + p2 @ (n1 - n0), ref, atol=1e-10)


def test_resolvent_matches_dense_solve(grid):
    f = random_solenoidal(np.random.default_rng(4), grid)
    lam = 0.3 + 0.5j
    phi = Resolvent(grid, lam).solve(f)
    mat = drift_operator(grid).matrix()
    dense = np.linalg.solve(mat - lam * np.eye(mat.shape[0]), f.flat)
    assert np.abs(phi.flat - dense).max() <= 1e-8 * np.abs(dense).max()


@pytest.mark.parametrize("lam", [-0.3, -0.25, -1.0])
def test_band_refusal(grid, lam):
    with pytest.raises(BandProximityError):
        Resolvent(grid, lam)


def test_decay_fit_recovers_power_law():
    t = np.logspace(0, 2, 12)
    fit = decay_fit(t, 3 * t**-0.375, log_time=True)
    assert abs(fit.slope + 0.375) < 1e-12 and abs(fit.r2 - 1) < 1e-12
    with pytest.raises(ValueError):
        decay_fit(t[:5], t[:5])


def test_imex_is_second_order_with_background(grid):
    # the step is set by the transport CFL limit, so refine through the safety factor
    rng = np.random.default_rng(8)
    a = Background.from_field(random_solenoidal(rng, grid) * 0.5)
    f = random_solenoidal(rng, grid)
    exact, _, _ = semigroup_La(PropagatorSpec(a, 0.1, "exact"), f, 1.0)
    errs = [x_norm(semigroup_La(PropagatorSpec(a, 0.04, safety=sf), f, 1.0)[0] - exact) for sf in (0.25, 0.125)]
    assert 3.5 < errs[0] / errs[1] < 4.5


@pytest.mark.parametrize("scheme,ratio", [("IMEX1", 2.0), ("IMEX2", 4.0)])
def test_order_under_weak_transport(grid, scheme, ratio):
    # exponential Euler needs weak transport: its explicit stage amplifies oscillatory modes
    rng = np.random.default_rng(8)
    a = Background.from_field(random_solenoidal(rng, grid) * 0.01)
    f = random_solenoidal(rng, grid)
    exact, _, _ = semigroup_La(PropagatorSpec(a, 0.1, "exact"), f, 1.0)
    errs = [x_norm(semigroup_La(PropagatorSpec(a, h, scheme), f, 1.0)[0] - exact) for h in (0.02, 0.01)]
    assert abs(errs[0] / errs[1] / ratio - 1) < 0.1


def test_pure_drift_spec_agrees_with_heat_substitution(grid):
    f = random_solenoidal(np.random.default_rng(9), grid)
    out, times, snaps = semigroup_La(PropagatorSpec(None, 0.05, "exact"), f, 1.0, samples=4)
    assert len(times) == len(snaps) == 5
    assert x_norm(out - semigroup_L(f, 1.0)) <= 1e-6 * x_norm(f)


def test_non_solenoidal_input_is_rejected(small_grid):
    comps = np.zeros((3, small_grid.nr, small_grid.nt))
    comps[0] = np.exp(-small_grid.radial.r**2)[:, None]  # radial, not divergence-free
    with pytest.raises(ValueError):
        semigroup_La(PropagatorSpec(), comps, 1.0, grid=small_grid)


def test_norm_history_rows(small_grid):
    f = random_solenoidal(np.random.default_rng(1), small_grid)
    rows = norm_history([0.0, 1.0], [f, f * 2])
    assert len(rows[0]) == 5
    assert abs(rows[1][3] - 2 * rows[0][3]) < 1e-12
