"""Scalar heat equation with a self-similar potential.

    u_t = Delta u + V u,   V(x, t) = A(x / sqrt t) / t,   x in R^n.

With u(x, t) = t^(-alpha/2) phi(x / sqrt t, log t) this becomes
phi_s = M_A phi + (alpha/2) phi with M_A = Delta + (y/2).grad + A.  For
radial A the operator splits into zonal channels of degree l.  Gaussian-
decaying eigenfunctions are computed in the conjugated variable
v = e^{|y|^2/8} phi, in which M_A becomes the harmonic oscillator
Delta - |y|^2/16 - n/4 + A with purely discrete spectrum.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from math import comb
from typing import Callable

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq
from scipy.sparse.linalg import expm_multiply

from .fields import ScalarField
from .grid import RadialGrid
from .heat import decay_fit, radial_block
from .norms import lp_norm
from .scaling import from_similarity, to_similarity

log = logging.getLogger(__name__)


def gaussian_bump(r):
    return np.exp(-np.asarray(r) ** 2 / 8)


@dataclass(frozen=True)
class ModelPotential:
    """A(y) = strength * profile(|y|) on R^n.

    Positive strength is a potential well in the Schrodinger sense and
    raises the spectrum of M_A.
    """

    n: int = 3
    strength: float = 0.0
    profile: Callable = gaussian_bump

    def __post_init__(self):
        if self.n < 1:
            raise ValueError("dimension must be >= 1")

    def __call__(self, r):
        return self.strength * self.profile(np.asarray(r, dtype=float))

    def scaled(self, strength: float) -> "ModelPotential":
        return ModelPotential(self.n, float(strength), self.profile)

    def physical(self, x, t):
        """V(x, t) = A(x / sqrt t) / t."""
        return self(np.asarray(x) / np.sqrt(t)) / t

    def decay_slope(self, grid: RadialGrid | None = None) -> float:
        """log-log slope of |A| over the outer decade where it is above round-off."""
        r = np.logspace(0, 3, 200)
        a = np.abs(self(r))
        keep = a > 1e-280
        if keep.sum() < 8 or self.strength == 0:
            return -np.inf
        return float(np.polyfit(np.log(r[keep][-20:]), np.log(a[keep][-20:]), 1)[0])


def channels(n: int, lmax: int = 6):
    """Zonal channel degrees available in dimension n."""
    if n == 1:
        return [0, 1]
    if n == 3:
        return list(range(lmax + 1))
    return [0]


def multiplicity(n: int, l: int) -> int:
    """Dimension of the degree-l spherical harmonics on S^(n-1)."""
    if n == 1:
        return 1
    return comb(l + n - 1, n - 1) - (comb(l + n - 3, n - 1) if l >= 2 else 0)


class ModelOperator:
    """Collocation matrix of M_A (+ offset alpha/2) in one channel."""

    def __init__(self, pot: ModelPotential, grid: RadialGrid | None = None, l: int = 0,
                 alpha: float | None = None, conjugated: bool = False):
        grid = grid or RadialGrid(dim=pot.n)
        if grid.dim != pot.n:
            raise ValueError("grid dimension must match the potential")
        self.pot, self.grid, self.l = pot, grid, l
        self.alpha = alpha
        self.conjugated = conjugated
        r = grid.r
        diag = pot(r) + (alpha / 2 if alpha is not None else 0.0)
        if conjugated:
            mat = radial_block(grid, l, 1, 0.0, drift=False)
            diag = diag - r**2 / 16 - pot.n / 4
        else:
            mat = radial_block(grid, l, 1, 0.0, drift=True)
        self.matrix = mat + np.diag(diag)

    def __call__(self, phi: ScalarField) -> ScalarField:
        return ScalarField(self.grid, self.matrix @ phi.values, self.l)

    def eig(self):
        w, v = sla.eig(self.matrix)
        order = np.argsort(-w.real)
        return w[order], v[:, order]


@dataclass
class ModelSpectrum:
    values: np.ndarray  # sorted by decreasing real part
    channels: np.ndarray
    multiplicities: np.ndarray
    abscissa: float
    refinement_stable: bool
    vectors: list = field(default_factory=list, repr=False)

    def leading(self, l: int | None = None):
        if l is None:
            return self.values[0]
        return self.values[self.channels == l][0]


def model_spectrum(pot: ModelPotential, how_many: int = 8, grid: RadialGrid | None = None,
                   alpha: float | None = None, lmax: int = 6, check_refinement: bool = True,
                   max_value: float = -1e9) -> ModelSpectrum:
    """Leading Gaussian-class eigenvalues of M_A over all channels."""
    grid = grid or RadialGrid(dim=pot.n)

    def collect(g):
        vals, chans, vecs = [], [], []
        for l in channels(pot.n, lmax):
            w, v = ModelOperator(pot, g, l, alpha, conjugated=True).eig()
            k = min(how_many, len(w))
            vals.extend(w[:k])
            chans.extend([l] * k)
            vecs.extend(v[:, j] for j in range(k))
        vals = np.asarray(vals)
        order = np.argsort(-vals.real, kind="stable")
        return vals[order][:how_many], np.asarray(chans)[order][:how_many], [vecs[i] for i in order[:how_many]]

    vals, chans, vecs = collect(grid)
    stable = True
    if check_refinement:
        fine, _, _ = collect(grid.refined(1.5))
        stable = bool(np.max(np.abs(fine[: len(vals)] - vals)) < 1e-4)
    mult = np.array([multiplicity(pot.n, int(l)) for l in chans])
    return ModelSpectrum(vals, chans, mult, float(vals.real.max()), stable, vecs)


def eigenfunction(pot: ModelPotential, grid: RadialGrid | None = None, l: int = 0, index: int = 0):
    """(lambda, phi) with phi = e^{-|y|^2/8} v, normalised in L^2."""
    grid = grid or RadialGrid(dim=pot.n)
    w, v = ModelOperator(pot, grid, l, conjugated=True).eig()
    phi = np.real_if_close(v[:, index] * np.exp(-grid.r**2 / 8))
    phi = np.real(phi)
    field_ = ScalarField(grid, phi, l)
    phi = phi / lp_norm(field_, 2)
    if phi[np.argmax(np.abs(phi))] < 0:
        phi = -phi
    return float(np.real(w[index])), ScalarField(grid, phi, l)


@dataclass
class PotentialRun:
    times: np.ndarray
    norms: dict  # p -> array of ||u(t)||_p
    blowup: bool
    fields: list = field(default_factory=list, repr=False)

    def exponent(self, p: float) -> float:
        return decay_fit(self.times, self.norms[p], log_time=True).slope


def simulate_potential_heat(pot: ModelPotential, u0: ScalarField, p_list, t_grid,
                            keep_fields: bool = False) -> PotentialRun:
    """Integrate u_t = Delta u + V u from t_grid[0] > 0; returns L^p norm histories.

    The equation is autonomous in log-time, so each interval is advanced by
    the exact exponential of the collocation operator (expm_multiply).
    """
    t_grid = np.asarray(t_grid, dtype=float)
    t0 = t_grid[0]
    if not t0 > 0:
        raise ValueError("the potential is singular at t = 0; start at t0 > 0")
    if np.any(np.diff(t_grid) <= 0):
        raise ValueError("t_grid must be increasing")
    phi = to_similarity(u0, t0, alpha=0.0)
    op = ModelOperator(pot, phi.grid, u0.l).matrix
    s = np.log(t_grid)
    norms = {p: np.zeros(len(t_grid)) for p in p_list}
    fields = []
    vec = phi.values.astype(float)
    blowup = False
    for k, t in enumerate(t_grid):
        if k:
            vec = expm_multiply(op * (s[k] - s[k - 1]), vec)
        if not np.all(np.isfinite(vec)) or np.abs(vec).max() > 1e250:
            blowup = True
            for p in p_list:
                norms[p][k:] = np.inf
            break
        u = from_similarity(ScalarField(phi.grid, vec, u0.l), t, alpha=0.0)
        for p in p_list:
            norms[p][k] = lp_norm(u, p)
        if keep_fields:
            fields.append(u)
    return PotentialRun(t_grid, norms, blowup, fields)


def threshold_classify(n: int, alpha: float, p: float, rtol: float = 1e-9) -> str:
    """Compare p with the critical exponent n / alpha."""
    if n < 1 or not alpha > 0 or not p > 1:
        raise ValueError("need n >= 1, alpha > 0, p > 1")
    crit = n / alpha
    if abs(p - crit) <= rtol * crit:
        return "marginal"
    return "illposed_expected" if p < crit else "wellposed_expected"


def strength_for_eigenvalue(target: float, n: int = 3, grid: RadialGrid | None = None,
                            bracket=(0.0, 50.0), profile: Callable = gaussian_bump) -> float:
    """Strength of the potential whose leading eigenvalue equals ``target``."""
    grid = grid or RadialGrid(dim=n)

    def lead(k):
        pot = ModelPotential(n, k, profile)
        return ModelOperator(pot, grid, 0, conjugated=True).eig()[0][0].real - target

    return float(brentq(lead, *bracket, xtol=1e-13))


def eigen_seeded_datum(pot: ModelPotential, t0: float, grid: RadialGrid | None = None, l: int = 0):
    """u(x, t0) = phi(x / sqrt t0) for the leading eigenpair (lambda, phi)."""
    lam, phi = eigenfunction(pot, grid, l)
    return lam, from_similarity(phi, t0, alpha=0.0)


@dataclass
class ThresholdRow:
    kappa: float
    lambda1: float
    p: float
    fitted_exponent: float
    classification: str
    observed: str


def threshold_sweep(n: int, alpha: float, kappas, p_list, t0: float = 1.0, span: float = 100.0,
                    samples: int = 24) -> list:
    """For each strength, eigen-seeded runs and the fitted L^p exponents."""
    rows = []
    grid = RadialGrid(dim=n)
    times = t0 * np.logspace(0, np.log10(span), samples)
    for kappa in kappas:
        pot = ModelPotential(n, float(kappa))
        lam, u0 = eigen_seeded_datum(pot, t0, grid)
        run = simulate_potential_heat(pot, u0, p_list, times)
        for p in p_list:
            e = run.exponent(p)
            rows.append(ThresholdRow(float(kappa), lam, float(p), e, threshold_classify(n, -2 * lam, p)
                                     if lam < 0 else "illposed_expected", "growth" if e > 0 else "decay"))
    return rows
