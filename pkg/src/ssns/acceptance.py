"""Acceptance checks, shared by ``ssns verify`` and the test suite.

Each check returns a CriterionResult with the measured quantities; the
thresholds are the stated tolerances and are not adjusted here.
"""
from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field

import numpy as np

from .fields import ScalarField, SimilarityGrid, VectorField
from .grid import RadialGrid

log = logging.getLogger(__name__)


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    measured: dict = field(default_factory=dict)
    seconds: float = 0.0
    budget: float = np.inf

    @property
    def within_budget(self) -> bool:
        return self.seconds <= self.budget

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        shown = ", ".join(f"{k}={_short(v)}" for k, v in self.measured.items())
        return f"[{tag}] criterion {self.number:2d} {self.name}: {shown} ({self.seconds:.1f}s)"

    def summary(self) -> dict:
        """Deterministic part (no wall time)."""
        return {"number": self.number, "name": self.name, "passed": bool(self.passed),
                "measured": _plain(self.measured)}


def _short(v):
    if isinstance(v, float):
        return f"{v:.6g}"
    if isinstance(v, (list, tuple)):
        return "[" + ", ".join(_short(x) for x in v) + "]"
    return str(v)


def _plain(v):
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(x) for x in v]
    if isinstance(v, (np.floating, float)):
        return float(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, np.bool_):
        return bool(v)
    return v


def _timed(number, name, budget):
    def wrap(fn):
        def run(*args, **kw):
            t0 = time.perf_counter()
            passed, measured = fn(*args, **kw)
            res = CriterionResult(number, name, bool(passed), measured, time.perf_counter() - t0, budget)
            log.info(res.line())
            return res

        run.number = number
        run.takes_seed = "seed" in fn.__code__.co_varnames[:fn.__code__.co_argcount]
        run.__name__ = fn.__name__
        run.__doc__ = fn.__doc__
        return run

    return wrap


# random probes -------------------------------------------------------------

def random_compact_scalar(rng, grid: RadialGrid) -> ScalarField:
    """(1 - (r/rho)^2)^4 (1 + c1 r^2 + c2 r^4) on r < rho, zero outside."""
    r = grid.r
    rho = rng.uniform(1.0, 3.0)
    c1, c2 = rng.uniform(-0.2, 0.5, size=2) / np.array([rho**2, rho**4])
    inside = r < rho
    vals = np.where(inside, (1 - (r / rho) ** 2) ** 4, 0.0) * (1 + c1 * r**2 + c2 * r**4)
    return ScalarField(grid, vals * rng.uniform(0.5, 2.0), 0)


def random_solenoidal(rng, grid: SimilarityGrid, lmax: int | None = None) -> VectorField:
    """Sum of random multiples of r^l exp(-r^2 / 4w) in every P/T channel."""
    r = grid.radial.r
    coeffs = np.zeros((2, grid.lmax, grid.nr))
    for i, l in enumerate(grid.ls):
        if lmax is not None and l > lmax:
            break
        for c in range(2):
            coeffs[c, i] = rng.standard_normal() * r**l * np.exp(-r**2 / (4 * rng.uniform(0.5, 2.0)))
    return VectorField(grid, coeffs)


# 1-6 ------------------------------------------------------------------------

@_timed(1, "heat L2->L4 decay exponent", 60)
def heat_decay(seed: int = 0, samples: int = 10):
    """Fitted exponent of ||e^{t Delta} phi0||_{L^4} over t in [1, 100] against -3/8."""
    from .heat import decay_fit, heat_evolve
    from .norms import lp_norm

    rng = np.random.default_rng(seed)
    grid = RadialGrid(dim=3)
    times = np.logspace(0, 2, 12)
    slopes = []
    for _ in range(samples):
        f = random_compact_scalar(rng, grid)
        norms = [lp_norm(heat_evolve(f, t), 4) for t in times]
        slopes.append(decay_fit(times, norms, log_time=True).slope)
    slopes = np.array(slopes)
    err = float(np.abs(slopes + 0.375).max())
    return err <= 0.02, {"target": -0.375, "mean_exponent": float(slopes.mean()), "max_deviation": err}


@_timed(2, "drift semigroup X-norm decay", 300)
def drift_decay(seed: int = 0, samples: int = 20):
    """Fitted decay rate of ||e^{Ls} phi||_X over s in [2, 10]."""
    from .heat import decay_fit, drift_operator
    from .norms import x_norm

    rng = np.random.default_rng(seed)
    grid = SimilarityGrid(RadialGrid())
    drift = drift_operator(grid)
    s = np.linspace(2, 10, 17)
    rates = []
    for _ in range(samples):
        vec = random_solenoidal(rng, grid).flat
        vals = []
        prev = 0.0
        for sk in s:
            vec = drift.propagate(vec, sk - prev)
            prev = sk
            vals.append(x_norm(VectorField.from_flat(grid, vec)))
        rates.append(-decay_fit(s, vals).slope)
    rates = np.array(rates)
    return rates.min() >= 0.23, {"min_rate": float(rates.min()), "mean_rate": float(rates.mean())}


@_timed(3, "resolvent residuals and band refusal", 120)
def resolvent_residuals(seed: int = 0, samples: int = 5):
    from .heat import BandProximityError, Resolvent
    from .norms import x_norm

    rng = np.random.default_rng(seed)
    grid = SimilarityGrid(RadialGrid())
    worst = 0.0
    for lam in (0.0, 1.0, 1 + 2j, -0.1):
        res = Resolvent(grid, lam)
        for _ in range(samples):
            f = random_solenoidal(rng, grid)
            phi = res.solve(f)
            worst = max(worst, x_norm(res.residual(phi, f)) / x_norm(f))
    try:
        Resolvent(grid, -0.3)
        refused = False
    except BandProximityError:
        refused = True
    return worst <= 1e-8 and refused, {"max_relative_residual": worst, "refused_-0.3": refused}


def hermite_reference(n: int, kmax: int = 6) -> np.ndarray:
    """Eigenvalues -(n + k)/2 of the unperturbed model operator."""
    return -(n + np.arange(kmax + 1)) / 2


@_timed(4, "Hermite oracle eigenvalues", 60)
def hermite_oracle():
    from .model import ModelPotential, model_spectrum

    worst = 0.0
    for n in (1, 3):
        vals = model_spectrum(ModelPotential(n, 0.0), how_many=40).values.real
        for e in hermite_reference(n):
            worst = max(worst, float(np.abs(vals - e).min()))
    return worst <= 1e-6, {"max_error": worst}


@_timed(5, "similarity scaling identity", 10)
def scaling_identity(seed: int = 0, samples: int = 20):
    """||t^{-a/2} phi(./sqrt t)||_p = t^{n/2p - a/2} ||phi||_p, with phi = exp(-r^2 / 4p).

    |phi|^p is the unit-width Gaussian, so ||phi||_p = (4 pi)^{n/2p} is also checked.
    """
    from .norms import lp_norm
    from .scaling import from_similarity, scaling_exponent

    rng = np.random.default_rng(seed)
    worst_id, worst_exact = 0.0, 0.0
    for _ in range(samples):
        n = int(rng.integers(1, 4))
        p = float(rng.uniform(1.1, 6.0))
        alpha = float(rng.uniform(0.0, 2.0))
        t = float(10 ** rng.uniform(-3, 2))
        grid = RadialGrid(dim=n)
        phi = ScalarField(grid, np.exp(-grid.r**2 / (4 * p)), 0)
        base = lp_norm(phi, p)
        exact = (4 * np.pi) ** (n / (2 * p))
        u = from_similarity(phi, t, alpha)
        ident = lp_norm(u, p) / (t ** scaling_exponent(n, p, alpha) * base) - 1
        worst_id = max(worst_id, abs(ident))
        worst_exact = max(worst_exact, abs(base / exact - 1))
    return max(worst_id, worst_exact) <= 1e-10, {"identity_error": worst_id, "quadrature_error": worst_exact}


@_timed(6, "threshold exhibit (alpha=2, n=3)", 600)
def threshold_exhibit():
    from .model import (ModelPotential, eigen_seeded_datum, simulate_potential_heat, strength_for_eigenvalue,
                        threshold_classify)

    n, alpha = 3, 2.0
    kappa = strength_for_eigenvalue(-alpha / 2, n)
    pot = ModelPotential(n, kappa)
    ok = True
    out = {"kappa": kappa}
    for t0 in (1.0, 0.1):
        lam, u0 = eigen_seeded_datum(pot, t0)
        run = simulate_potential_heat(pot, u0, [1.2, 2.0], t0 * np.logspace(0, 2, 24))
        e12, e2 = run.exponent(1.2), run.exponent(2.0)
        ok &= e12 > 0 and e2 < 0
        ok &= threshold_classify(n, alpha, 1.2) == "illposed_expected"
        ok &= threshold_classify(n, alpha, 2.0) == "wellposed_expected"
        out[f"t0={t0:g}"] = [e12, e2]
    return ok, out


# 7-12 -----------------------------------------------------------------------

def planted_correction(grid: SimilarityGrid, amplitude: float = 0.05, width: float = 2.0) -> VectorField:
    """Decaying field with an exact |y|^-3 tail.

    P = r^l (1 + r^2/w^2)^-(l+2)/2 and T = r^l (1 + r^2/w^2)^-(l+3)/2 for l <= 3;
    the width keeps the complex poles of the profile far enough from the
    real axis of the mapped coordinate for spectral accuracy.
    """
    r = grid.radial.r
    q = 1 + (r / width) ** 2
    coeffs = np.zeros((2, grid.lmax, grid.nr))
    for i, l in enumerate(grid.ls[:3]):
        coeffs[0, i] = r**l * q ** (-(l + 2) / 2) / l
        coeffs[1, i] = r**l * q ** (-(l + 3) / 2) / l
    return VectorField(grid, amplitude * coeffs)


@_timed(7, "manufactured profile and far-field rate", 300)
def manufactured_profile(sigma: float = 0.3):
    """Plant phi*, force F(phi*) = 0, solve by Newton from zero."""
    from .datum import swirl_datum
    from .norms import x_norm
    from .profile import ProfileProblem, farfield_decay_rate, solve_profile

    grid = SimilarityGrid(RadialGrid())
    datum = swirl_datum()
    star = planted_correction(grid)
    forcing = VectorField.from_flat(grid, -ProfileProblem(datum, grid).residual(star.flat, sigma))
    prof = solve_profile(datum, sigma, grid=grid, forcing=forcing, tol=1e-12)
    err = x_norm(prof.phi - star)
    h = np.asarray(prof.history)
    steps = [(h[k + 1] / h[k] ** 2) for k in range(len(h) - 1) if h[k] > 1e-9 and h[k + 1] > 0]
    ratio = float(max(steps)) if steps else 0.0
    slope, _ = farfield_decay_rate(star)
    ok = prof.converged and err <= 1e-8 and ratio <= 1e3 and abs(slope + 3) <= 0.05
    return ok, {"x_error": err, "newton_steps": len(h) - 1, "max_quadratic_ratio": ratio, "farfield_slope": slope}


@_timed(8, "perturbative uniqueness at sigma=0.1", 600)
def perturbative_uniqueness(seed: int = 0, sigma: float = 0.1):
    from .datum import swirl_datum
    from .norms import x_norm
    from .profile import solve_profile
    from .spectra import leading_spectrum

    rng = np.random.default_rng(seed)
    grid = SimilarityGrid(RadialGrid())
    datum = swirl_datum()
    guesses = [None, planted_correction(grid, 0.02), random_solenoidal(rng, grid, lmax=3) * 0.01]
    profs = [solve_profile(datum, sigma, guess=g, grid=grid, tol=1e-11) for g in guesses]
    dist = max(x_norm(p.phi - q.phi) for i, p in enumerate(profs) for q in profs[i + 1:])
    rep = leading_spectrum(profs[0].background(), 8, grid=grid)
    ok = all(p.converged for p in profs) and dist <= 1e-8 and rep.abscissa_s < 0
    return ok, {"max_pairwise_x_distance": dist, "abscissa_s": rep.abscissa_s}


@_timed(9, "growth bound identity", 600)
def growth_bound_identity(sigma: float = 0.1):
    from .datum import swirl_datum
    from .profile import solve_profile
    from .spectra import growth_bound, leading_spectrum, planted_operator

    grid = SimilarityGrid(RadialGrid())
    prof = solve_profile(swirl_datum(), sigma, grid=grid)
    cases = {"a=0": None, "a=U_0.1": prof.background(), "planted": planted_operator(grid, [[0.1]])}
    out, ok = {}, True
    for name, a in cases.items():
        rep = leading_spectrum(a, 6, grid=grid)
        w = growth_bound(a, grid=grid)
        dev = abs(w - max(rep.abscissa_s, -0.25))
        out[name] = [w, rep.abscissa_s, dev]
        ok &= dev <= 0.02
    return ok, out


def _synthetic_curve(kind: str, seed: int = 0):
    from .spectra import EigenCurve

    s = np.linspace(0.0, 2.0, 21)
    noise = 1e-6 * np.random.default_rng(seed).standard_normal(21)
    if kind == "A":
        return EigenCurve.from_values(s, (s - 1.0) * 0.1 + noise + 0.3j)
    return EigenCurve.from_values(s, (s - 1.0) + noise + 0j, fold={"sigma": 1.0})


@_timed(10, "fold machinery", 120)
def fold_machinery(s0: float = 0.7):
    from .continuation import PlantedFold, continue_branch
    from .model import ModelOperator, ModelPotential
    from .spectra import classify_crossing, track_eigencurve

    H = ModelOperator(ModelPotential(3, 0.0), RadialGrid(31, 8.0, 3), 0, conjugated=True).matrix
    pf = PlantedFold(H, s0=s0)
    st = continue_branch(pf, pf.solution(-0.3, 1.0), -0.3, 1.2, step=0.05)
    located = st.fold["sigma"] if st.fold else np.nan
    both = len(st.segments) == 2 and all(len(seg) > 1 for seg in st.segments)
    kind_b = classify_crossing(track_eigencurve(st, problem=pf, how_many=3)).kind
    kind_a = classify_crossing(_synthetic_curve("A")).kind
    ok = abs(located - s0) <= 1e-4 and both and kind_b == "B" and kind_a == "A"
    return ok, {"fold_sigma": located, "segments": [len(seg) for seg in st.segments],
                "planted_label": kind_b, "complex_label": kind_a}


@_timed(11, "ancient cross-validation", 900)
def ancient_cross_validation(amplitude: float = 1e-3, T_back: float = 160.0):
    from .ancient import UnstableSplit, fixed_point_ancient, scenario_a_operator, shoot_ancient, unstable_seed

    grid = SimilarityGrid(RadialGrid())
    split = UnstableSplit(scenario_a_operator(grid))
    seed = unstable_seed(split, amplitude)
    shot = shoot_ancient(split, seed, T_back)
    fixed = fixed_point_ancient(split, seed, T_back)
    half = fixed_point_ancient(split, unstable_seed(split, amplitude / 2), T_back)
    dist = shot.sup_x_distance(fixed)
    rate = fixed.l4_rate() / split.beta
    halving = fixed.contraction_ratio / half.contraction_ratio
    ok = dist <= 1e-4 and abs(rate - 1) <= 0.05 and abs(halving - 2) <= 0.4
    return ok, {"sup_x_distance": dist, "l4_rate_over_beta": rate, "ratio_halving": halving}


@_timed(12, "localization pipeline", 1200)
def localization_pipeline(sigma: float = 0.1, R: float = 4.0, eps: float = 1e-3, beta: float = 1.0 / 32):
    from .datum import swirl_datum
    from .localize import (LocalizationProblem, certify_abscissa, nonuniqueness_certificate, solve_perturbed_nse,
                           split_datum, synthetic_perturbation)
    from .profile import solve_profile

    datum = swirl_datum()
    prof = solve_profile(datum, sigma)
    a, grid = prof.background(), prof.grid
    cert = certify_abscissa(a, grid)
    rep = nonuniqueness_certificate(a, split_datum(datum.with_sigma(sigma), R),
                                    synthetic_perturbation(grid, eps, beta), cert, profile=prof)
    probe = solve_perturbed_nse(LocalizationProblem(grid, a, None, certificate=cert))
    probe_max = max(float(np.abs(f.coeffs).max()) for f in probe.phi)
    target = beta - 0.125
    finite = all(np.isfinite(v) for v in rep.l2_sup)
    ok = abs(rep.sep_exponent / target - 1) <= 0.10 and finite and probe_max <= 1e-8
    return ok, {"sep_exponent": rep.sep_exponent, "target": target, "l2_sup": list(rep.l2_sup),
                "probe_max": probe_max}


CHECKS = [heat_decay, drift_decay, resolvent_residuals, hermite_oracle, scaling_identity, threshold_exhibit,
          manufactured_profile, perturbative_uniqueness, growth_bound_identity, fold_machinery,
          ancient_cross_validation, localization_pipeline]


def run_checks(numbers=None, seed: int = 0) -> list:
    out = []
    for check in CHECKS:
        if numbers is not None and check.number not in numbers:
            continue
        out.append(check(seed=seed) if check.takes_seed else check())
    return out


def summary_bytes(results) -> bytes:
    return json.dumps([r.summary() for r in results], sort_keys=True).encode()


def determinism(first, second) -> CriterionResult:
    same = summary_bytes(first) == summary_bytes(second)
    return CriterionResult(13, "determinism of verify summaries", same,
                           {"identical": same, "criteria": len(first)})
