"""Steady self-similar profiles U_sigma and their continuation in sigma.

The profile solves L U - P(U.grad U) = 0 with U - sigma e^Delta u0 = O(|y|^-3).
Since e^Delta u0 is itself annihilated by L, the unknown is the decaying
correction phi in

    U = U_ref + (sigma - sigma_ref) e^Delta u0 + phi,
    F(phi, sigma) = L (phi_ref + phi) - P(U.grad U) = 0,

with phi_ref the correction of the reference profile U_ref.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
from scipy.sparse.linalg import LinearOperator, gmres

from .datum import InitialDatum
from .fields import SimilarityGrid, VectorField, advect, projector, synthesize
from .grid import RadialGrid
from .heat import drift_operator
from .norms import l2_factor, x_norm
from .operators import Background, KOperator

log = logging.getLogger(__name__)


def initial_guess(datum: InitialDatum, sigma: float, grid: SimilarityGrid) -> Background:
    """sigma e^Delta u0 on the grid (the t = 1 heat flow of the datum)."""
    return Background.from_datum(datum.with_sigma(sigma), grid)


@dataclass
class Profile:
    sigma: float
    datum: InitialDatum
    phi: VectorField  # U - sigma e^Delta u0
    residual_x_norm: float = np.inf
    farfield_slope: float = np.nan
    converged: bool = False
    history: list = field(default_factory=list)

    @property
    def grid(self) -> SimilarityGrid:
        return self.phi.grid

    def background(self) -> Background:
        return initial_guess(self.datum, self.sigma, self.grid) + Background.from_field(self.phi)

    def ratios(self):
        """Newton residual ratios r_{k+1} / r_k^2."""
        h = np.asarray(self.history)
        h = h[h > 0]
        return h[1:] / h[:-1] ** 2


class ProfileProblem:
    """F(phi, sigma) for a datum, optionally with a manufactured forcing g."""

    def __init__(self, datum: InitialDatum, grid: SimilarityGrid, forcing: VectorField | None = None):
        self.datum = datum.with_sigma(1.0)
        self.grid = grid
        self.drift = drift_operator(grid)
        self.heat = Background.from_datum(self.datum, grid)
        self.forcing = forcing

    def total(self, vec, sigma) -> Background:
        return self.heat * sigma + Background.from_field(VectorField.from_flat(self.grid, vec))

    def residual(self, vec, sigma) -> np.ndarray:
        bg = self.total(vec, sigma)
        u, ur, ut = bg.u, bg.ur, bg.ut
        quad = projector(self.grid)(advect(self.grid, u, ur, ut, u, ur, ut)).flat
        out = self.drift.apply(vec) - quad
        if self.forcing is not None:
            out = out + self.forcing.flat
        return out

    def jacobian_operator(self, vec, sigma) -> KOperator:
        return KOperator(self.total(vec, sigma))

    def jacobian(self, vec, sigma) -> np.ndarray:
        return self.drift.matrix() - self.jacobian_operator(vec, sigma).matrix()

    def d_sigma(self, vec, sigma) -> np.ndarray:
        """dF/dsigma = -P(U_h.grad U + U.grad U_h)."""
        bg = self.total(vec, sigma)
        h = self.heat
        comps = advect(self.grid, h.u, h.ur, h.ut, bg.u, bg.ur, bg.ut)
        comps = comps + advect(self.grid, bg.u, bg.ur, bg.ut, h.u, h.ur, h.ut)
        return -projector(self.grid)(comps).flat

    def scaled_jacobian(self, jac) -> np.ndarray:
        """J L^-1 = I - K L^-1 in L^2-orthonormal coordinates.

        Raw collocation rows carry the stiff far-field scaling of the map, so
        the singular values of J itself say little about fold proximity.
        """
        if getattr(self, "_scale", None) is None:
            r = l2_factor(self.grid)
            self._scale = (r, np.linalg.inv(self.drift.matrix()) @ np.linalg.inv(r))
        r, tail = self._scale
        return r @ jac @ tail

    def norm(self, vec) -> float:
        return x_norm(VectorField.from_flat(self.grid, vec))


class NewtonError(RuntimeError):
    pass


def newton(problem, vec, sigma, tol: float = 1e-10, maxit: int = 20, krylov: bool = True):
    """Newton iteration on problem.residual; returns (vec, history, converged)."""
    hist = []
    best = (np.inf, vec)
    drift = getattr(problem, "drift", None)
    lu = [sla.lu_factor(b) for b in drift.blocks] if (krylov and drift is not None) else None
    n = vec.size
    for it in range(maxit + 1):
        res = problem.residual(vec, sigma)
        rn = problem.norm(res)
        hist.append(rn)
        if rn < best[0]:
            best = (rn, vec.copy())
        if rn <= tol:
            return vec, hist, True
        if it == maxit or not np.isfinite(rn):
            break
        if lu is not None:
            kop = problem.jacobian_operator(vec, sigma)
            nb = len(lu)

            def precond(x):
                x = x.reshape(nb, -1)
                return np.concatenate([sla.lu_solve(f, xi) for f, xi in zip(lu, x)])

            jac = LinearOperator((n, n), matvec=lambda z: problem.drift.apply(z) - kop.apply(z), dtype=float)
            m = LinearOperator((n, n), matvec=precond, dtype=float)
            delta, info = gmres(jac, -res, M=m, rtol=1e-13, atol=0.0, restart=200, maxiter=20)
            if info != 0:
                log.debug("GMRES info %d in Newton step %d", info, it)
        else:
            delta = np.linalg.solve(problem.jacobian(vec, sigma), -res)
        vec = vec + delta
        if len(hist) > 4 and hist[-1] > 0.9 * hist[-4]:
            log.warning("Newton stagnating at residual %.3e", rn)
            break
    return best[1], hist, False


def solve_profile(datum: InitialDatum, sigma: float, guess: VectorField | None = None,
                  grid: SimilarityGrid | None = None, tol: float = 1e-10, forcing: VectorField | None = None,
                  maxit: int = 20) -> Profile:
    """Newton-Krylov solve of F(phi, sigma) = 0 for the correction phi."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    grid = grid or (guess.grid if guess is not None else SimilarityGrid(RadialGrid()))
    problem = ProfileProblem(datum, grid, forcing)
    vec = np.zeros(grid.n_dof) if guess is None else guess.flat.astype(float).copy()
    vec, hist, ok = newton(problem, vec, sigma, tol, maxit)
    phi = VectorField.from_flat(grid, vec)
    prof = Profile(float(sigma), datum.with_sigma(1.0), phi, hist[-1] if ok else min(hist), np.nan, ok, hist)
    prof.farfield_slope = farfield_decay_rate(prof)[0]
    if not ok:
        log.warning("profile solve at sigma=%g did not converge (residual %.3e)", sigma, prof.residual_x_norm)
    return prof


def farfield_decay_rate(profile_or_field, floor: float = 1e-13):
    """Log-log slope of |U - sigma e^Delta u0| over the outer third of the nodes.

    Returns (slope, flagged); flagged is True when the tail sits below
    round-off and the slope is meaningless.
    """
    phi = profile_or_field.phi if isinstance(profile_or_field, Profile) else profile_or_field
    g = phi.grid
    u = synthesize(g, phi.coeffs)
    mag = np.sqrt(np.sum(np.abs(u) ** 2, axis=0)).max(axis=1)
    r = g.radial.r
    top = mag.max()
    if top == 0:
        return np.nan, True
    outer = np.arange(g.nr) >= (2 * g.nr) // 3
    keep = outer & (mag > floor * max(top, 1.0))
    if keep.sum() < 4:
        return np.nan, True
    slope = np.polyfit(np.log(r[keep]), np.log(mag[keep]), 1)[0]
    return float(slope), False


def profile_from_point(problem: ProfileProblem, point) -> Profile:
    phi = VectorField.from_flat(problem.grid, point.u)
    prof = Profile(point.sigma, problem.datum, phi, point.residual, np.nan, True, [point.residual])
    prof.farfield_slope = farfield_decay_rate(prof)[0]
    return prof


def continue_profiles(datum: InitialDatum, target: float, step: float = 0.05, sigma0: float = 0.0,
                      grid: SimilarityGrid | None = None, guess: VectorField | None = None,
                      tol: float = 1e-10, sv_threshold: float = 1e-3, max_steps: int = 400,
                      jsonl=None, snapshot_dir=None):
    """Continue U_sigma from sigma0 to ``target``; returns (state, profiles).

    With ``jsonl`` set, one record {sigma, residual, farfield_slope,
    snapshot_path} is appended per accepted point; snapshots go to
    ``snapshot_dir`` when given.
    """
    from pathlib import Path

    from .continuation import continue_branch
    from .io import append_jsonl, write_snapshot

    grid = grid or (guess.grid if guess is not None else SimilarityGrid(RadialGrid()))
    problem = ProfileProblem(datum, grid)
    vec = np.zeros(grid.n_dof) if guess is None else guess.flat.astype(float)
    state = continue_branch(problem, vec, sigma0, target, step=step, tol=tol,
                            sv_threshold=sv_threshold, max_steps=max_steps)
    profiles = [profile_from_point(problem, p) for p in state.branch]
    if jsonl is not None:
        Path(jsonl).parent.mkdir(parents=True, exist_ok=True)
        Path(jsonl).write_text("")
        for k, prof in enumerate(profiles):
            snap = None
            if snapshot_dir is not None:
                snap = str(write_snapshot(Path(snapshot_dir) / f"profile_{k:04d}.ssns", prof.phi))
            append_jsonl(jsonl, {"sigma": prof.sigma, "residual": prof.residual_x_norm,
                                 "farfield_slope": prof.farfield_slope, "snapshot_path": snap})
    return state, profiles
