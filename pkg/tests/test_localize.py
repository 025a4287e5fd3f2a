"""Truncated data, localized Duhamel solves and the separation certificate."""
import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ssns.datum import swirl_datum
from ssns.fields import SimilarityGrid, VectorField
from ssns.grid import RadialGrid
from ssns.localize import (CertificateError, LocalizationProblem, TailPath, certify_abscissa, cutoff,
                           interpolation_ratio, nonuniqueness_certificate, profile_energy, solve_perturbed_nse,
                           solve_singular_stokes, split_datum, synthetic_perturbation)
from ssns.operators import Background
from ssns.profile import solve_profile
from ssns.scaling import from_similarity
from ssns.spectra import gaussian_mode

SIGMA = 0.1


@pytest.fixture(scope="module")
def small_profile(small_grid):
    return solve_profile(swirl_datum(), SIGMA, grid=small_grid)


def test_cutoff_shape():
    R = 3.0
    r = np.linspace(0, 8, 801)
    chi, c1, _ = cutoff(r, R)
    assert np.all(chi[r <= R] == 1.0) and np.all(chi[r >= 2 * R] == 0.0)
    assert np.all((chi >= 0) & (chi <= 1)) and np.all(c1 <= 0)


@settings(max_examples=20)
@given(r=st.floats(1.05, 1.95), R=st.floats(1.0, 6.0))
def test_cutoff_derivatives(r, R):
    x, h = r * R, 1e-5 * R
    f = lambda v: cutoff(np.array([v]), R)[0][0]
    _, c1, c2 = cutoff(np.array([x]), R)
    assert c1[0] == pytest.approx((f(x + h) - f(x - h)) / (2 * h), abs=1e-7 / R)
    assert c2[0] == pytest.approx((f(x + h) - 2 * f(x) + f(x - h)) / h**2, abs=1e-3 / R**2)


def test_pieces_add_up_to_the_datum():
    trunc = split_datum(swirl_datum(SIGMA), 2.0)
    r = np.linspace(0.3, 9.0, 40)
    th = np.linspace(0.1, 3.0, 7)
    total = trunc.components(r, th, "v0") + trunc.components(r, th, "w0")
    exact = swirl_datum(SIGMA)(r[:, None], th[None, :])
    assert np.allclose(total, exact, rtol=1e-13, atol=1e-15)
    v0 = trunc.components(r, th, "v0")
    assert np.allclose(v0[:, r <= 2.0], exact[:, r <= 2.0], rtol=1e-14)
    assert np.all(v0[:, r >= 4.0] == 0)


@settings(max_examples=10)
@given(p1=st.floats(-1, 1), t2=st.floats(-1, 1), R=st.floats(1, 5))
def test_truncation_is_divergence_free(p1, t2, R):
    from ssns.datum import InitialDatum

    trunc = split_datum(InitialDatum((p1, 0.3), (1.0, t2), 1.0), R)
    r = np.linspace(0.5 * R, 2.5 * R, 33)
    th = np.linspace(0.05, 3.09, 9)
    for part in ("v0", "w0"):
        assert np.abs(trunc.divergence(r, th, part)).max() < 1e-12


@settings(max_examples=5)
@given(R=st.floats(1.0, 20.0))
def test_remainder_norm_scales_like_r_to_minus_quarter(R):
    base = split_datum(swirl_datum(SIGMA), 1.0).l4_constant()
    assert split_datum(swirl_datum(SIGMA), R).l4_constant() == pytest.approx(base, rel=1e-8)


def test_bad_radius():
    with pytest.raises(ValueError):
        split_datum(swirl_datum(), 0.5)


def test_certificate_required(small_profile, small_grid):
    a = small_profile.background()
    with pytest.raises(CertificateError):
        LocalizationProblem(small_grid, a)
    with pytest.raises(CertificateError):
        LocalizationProblem(small_grid, a, certificate=0.2)
    LocalizationProblem(small_grid, Background.zero(small_grid))


def test_window_must_be_ordered(small_grid):
    with pytest.raises(ValueError):
        LocalizationProblem(small_grid, t_min=2.0)


def test_no_data_gives_zero(small_profile, small_grid):
    for a, cert in ((None, None), (small_profile.background(), -0.5)):
        sol = solve_perturbed_nse(LocalizationProblem(small_grid, a, certificate=cert))
        assert max(float(np.abs(f.coeffs).max()) for f in sol.phi) == 0.0


def _mode(grid):
    vec, lam = gaussian_mode(grid, 1, 1)
    return VectorField.from_flat(grid, vec), lam


def test_stokes_solve_is_linear(small_profile, small_grid):
    a = small_profile.background()
    f, _ = _mode(small_grid)
    g = VectorField.from_flat(small_grid, gaussian_mode(small_grid, 0, 2)[0])

    def run(forcing):
        prob = LocalizationProblem(small_grid, a, forcing=forcing, certificate=-0.5, t_min=0.1, lookback=4.0)
        return np.array([p.flat for p in solve_singular_stokes(prob).phi])

    one = run(lambda s: f * np.cos(s))
    two = run(lambda s: g * np.exp(s))
    both = run(lambda s: f * np.cos(s) + g * np.exp(s))
    assert np.abs(both - one - two).max() <= 1e-13 * np.abs(both).max()


def _manufactured_error(grid, h):
    f, mu = _mode(grid)
    k = mu - 0.5
    s0, t_min = -4.0, np.exp(-2.0)
    prob = LocalizationProblem(grid, forcing=lambda s: f * np.sin(s), T=1.0, t_min=t_min, h=h, h_coarse=h,
                               lookback=2.0)
    sol = solve_singular_stokes(prob)
    # c' = k c + sin s, c(s0) = 0
    part = lambda s: -(k * np.sin(s) + np.cos(s)) / (k * k + 1)
    exact = part(0.0) - part(s0) * np.exp(-k * s0)
    return float(np.abs(sol.phi[-1].flat - exact * f.flat).max())


def test_exponential_trapezoid_is_second_order(grid):
    errs = [_manufactured_error(grid, h) for h in (0.2, 0.1, 0.05)]
    assert errs[0] / errs[1] == pytest.approx(4.0, rel=0.1)
    assert errs[1] / errs[2] == pytest.approx(4.0, rel=0.1)


@settings(max_examples=8)
@given(t=st.floats(1e-3, 1e3))
def test_interpolation_ratio_is_scale_invariant(grid, t):
    f, _ = _mode(grid)
    f = f + VectorField.from_flat(grid, gaussian_mode(grid, 0, 2)[0]) * 0.5
    assert interpolation_ratio(from_similarity(f, t)) == pytest.approx(interpolation_ratio(f), rel=1e-10)


@pytest.fixture(scope="module")
def certificates(small_profile):
    a, g = small_profile.background(), small_profile.grid
    cert = certify_abscissa(a, g)
    trunc = split_datum(swirl_datum(SIGMA), 4.0)
    return [nonuniqueness_certificate(a, trunc, synthetic_perturbation(g, eps), cert, profile=small_profile)
            for eps in (1e-3, 2e-3)]


def test_separation_exponent(certificates):
    rep = certificates[0]
    assert rep.target_exponent == pytest.approx(1 / 32 - 1 / 8)
    assert rep.sep_exponent == pytest.approx(rep.target_exponent, rel=0.10)


def test_separation_linear_in_eps(certificates):
    small, large = certificates
    assert np.allclose(large.sep_values / small.sep_values, 2.0, rtol=1e-3)


def test_energies_are_finite(certificates):
    for rep in certificates:
        assert all(np.isfinite(v) and v > 0 for v in rep.l2_sup)


def test_energy_stable_under_refinement():
    d = swirl_datum(SIGMA)
    sups = []
    for order in (95, 143):
        prof = solve_profile(swirl_datum(), SIGMA, grid=SimilarityGrid(RadialGrid(order), 6))
        g = prof.grid
        sol = solve_perturbed_nse(LocalizationProblem(g, prof.background(), TailPath(split_datum(d, 4.0), g),
                                                      certificate=-0.5))
        sups.append(profile_energy(sol, prof).max())
    assert sups[1] == pytest.approx(sups[0], rel=0.02)


def test_small_time_energy_approaches_truncated_datum(profile_01):
    """As t -> 0 the energy tends to ||v0||_2 = sigma (int chi^2 dr int |g|^2 dOmega)^1/2."""
    from scipy.integrate import quad

    R = 4.0
    g = profile_01.grid
    sol = solve_perturbed_nse(LocalizationProblem(g, profile_01.background(),
                                                  TailPath(split_datum(swirl_datum(SIGMA), R), g),
                                                  certificate=-0.5))
    mu, w = np.polynomial.legendre.leggauss(32)
    gv = swirl_datum().sphere_values(np.arccos(mu))
    sphere = 2 * np.pi * np.dot(w, np.sum(gv**2, axis=0))
    radial = quad(lambda r: cutoff(np.array([r]), R)[0][0] ** 2, 0, 2 * R, limit=200)[0]
    exact = SIGMA * np.sqrt(sphere * radial)
    assert profile_energy(sol, profile_01)[0] == pytest.approx(exact, rel=0.01)
