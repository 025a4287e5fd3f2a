"""Ancient solutions on the unstable manifold of a complex pair.

    phi_t = A phi - P(phi.grad phi),   t in (-T_back, 0],

with A = L - K(U_sigma) (or a planted operator) having a simple pair
beta +- i omega, 0 < beta <= 1/32, and the rest of its spectrum to the left.
Two constructions are provided: shooting forward from the linearised
unstable solution at -T_back, and Picard iteration of the Duhamel split
into unstable and stable parts in the weighted norm
sup_t e^{-beta t} (||phi||_X + ||grad phi||_X).
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .fields import VectorField
from .heat import decay_fit, phi_functions
from .norms import grad_x_norm, lp_norm, x_norm
from .operators import nonlinear
from .spectra import LinearizedOperator, SpectrumReport, propagator_eigs

log = logging.getLogger(__name__)

BETA_MAX = 1.0 / 32


class AncientError(RuntimeError):
    pass


class BudgetError(AncientError):
    """The trajectory left the small-norm budget: reduce the amplitude."""


class ContractionError(AncientError):
    pass


class UnstableSplit:
    """Biorthogonal projection onto the leading pair of ``op`` and its complement.

    V = [Re phi, Im phi] from the eigenpair, Y from the adjoint pair;
    P_u = V (Y^T V)^-1 Y^T and A V = V Lam with the real 2x2 block Lam.
    """

    def __init__(self, op: LinearizedOperator, report: SpectrumReport | None = None, T: float = 1.0):
        self.op = op
        if report is None:
            from .spectra import leading_spectrum

            report = leading_spectrum(op, 4, T=T)
        lead = report.ritz_pairs[0]
        lam = lead.value
        if lam.imag < 0:
            lam = np.conj(lam)
        if not (abs(lam.imag) > 1e-8 and 0 < lam.real <= BETA_MAX + 1e-9):
            raise AncientError(f"no scenario-A pair: leading eigenvalue {lam:.6g}")
        mat = op.matrix
        phi = lead.field.flat if lead.value.imag > 0 else np.conj(lead.field.flat)
        adj_vals, adj_vecs, _ = propagator_eigs(mat.T, 4, T)
        j = int(np.argmin(np.abs(adj_vals - lam)))
        psi = adj_vecs[:, j]
        self.V = np.column_stack([phi.real, phi.imag])
        y = np.column_stack([psi.real, psi.imag])
        self.Wt = np.linalg.solve(y.T @ self.V, y.T)
        self.Lam = self.Wt @ mat @ self.V
        self.lam = complex(lam)
        self.beta = float(lam.real)
        self.grid = op.grid
        self._etd: dict = {}

    def unstable_coords(self, vec):
        return self.Wt @ vec

    def stable_part(self, vec):
        return vec - self.V @ (self.Wt @ vec)

    def linear_unstable(self, c0, t):
        """V e^{Lam t} c0."""
        return self.V @ (sla.expm(self.Lam * t) @ c0)

    def etd(self, h: float):
        key = round(h, 14)
        if key not in self._etd:
            self._etd[key] = phi_functions(self.op.matrix, h)
        return self._etd[key]


def unstable_seed(split: UnstableSplit, amplitude: float, phase: float = 0.0) -> VectorField:
    """Real field amplitude * Re(e^{i phase} phi_1) / ||.||_X in the unstable subspace."""
    if amplitude == 0:
        return VectorField(split.grid, np.zeros((2, split.grid.lmax, split.grid.nr)))
    vec = split.V @ np.array([np.cos(phase), -np.sin(phase)])
    f = VectorField.from_flat(split.grid, vec)
    return f * (amplitude / x_norm(f))


@dataclass
class AncientTrajectory:
    sigma: float
    times: np.ndarray
    fields: list
    beta: float
    seed_amplitude: float
    unstable_basis: tuple
    norm_history: np.ndarray = field(default=None, repr=False)  # rows t, x_norm, l4_norm, grad_x_norm
    method: str = ""
    contraction_ratio: float = np.nan
    iterations: int = 0
    increments: list = field(default_factory=list)

    def l4_rate(self, efolds: float = 3.0) -> float:
        """Fitted exponential rate of ||phi||_{L^4} over the last ``efolds`` e-folds."""
        t = self.norm_history[:, 0]
        window = (-efolds / self.beta, 0.0)
        return decay_fit(t, self.norm_history[:, 2], window=window).slope

    def sup_x_distance(self, other: "AncientTrajectory") -> float:
        if len(self.fields) != len(other.fields) or not np.allclose(self.times, other.times):
            raise ValueError("trajectories are sampled at different times")
        return max(x_norm(a - b) for a, b in zip(self.fields, other.fields))

    def stable_norms(self, split: UnstableSplit) -> np.ndarray:
        return np.array([x_norm(VectorField.from_flat(split.grid, split.stable_part(f.flat))) for f in self.fields])

    def at(self, t: float) -> VectorField:
        return self.fields[int(np.argmin(np.abs(self.times - t)))]


def _history(times, fields):
    return np.array([(t, x_norm(f), lp_norm(f, 4), grad_x_norm(f)) for t, f in zip(times, fields)])


def _time_grid(T_back: float, h: float):
    n = int(round(T_back / h))
    if n < 1 or abs(n * h - T_back) > 1e-9 * T_back:
        raise ValueError("T_back must be a multiple of the time step")
    return -T_back + h * np.arange(n + 1)


def _nonlin(grid, vec):
    return -nonlinear(VectorField.from_flat(grid, vec)).flat


def _check_tback(split, T_back):
    if T_back < (5 / split.beta) * (1 - 1e-6):
        raise ValueError(f"T_back must be >= 5/beta = {5 / split.beta:.4g}")


def shoot_ancient(split: UnstableSplit, seed: VectorField, T_back: float, h: float = 0.1,
                  epsilon: float = np.inf, keep_every: int = 10, sigma: float = np.nan) -> AncientTrajectory:
    """Integrate forward from the linear unstable solution at -T_back to 0 (ETD2RK)."""
    _check_tback(split, T_back)
    times = _time_grid(T_back, h)
    amp = x_norm(seed)
    c0 = split.unstable_coords(seed.flat)
    vec = split.linear_unstable(c0, -T_back)
    e, p1, p2 = split.etd(h)
    g = split.grid
    kept_t, kept = [times[0]], [VectorField.from_flat(g, vec.copy())]
    for k in range(1, len(times)):
        n0 = _nonlin(g, vec)
        a = e @ vec + p1 @ n0
        vec = a + p2 @ (_nonlin(g, a) - n0)
        if not np.all(np.isfinite(vec)):
            raise BudgetError("trajectory blew up")
        if k % keep_every == 0 or k == len(times) - 1:
            kept_t.append(times[k])
            kept.append(VectorField.from_flat(g, vec.copy()))
    hist = _history(kept_t, kept)
    _check_budget(hist, epsilon)
    return AncientTrajectory(sigma, np.array(kept_t), kept, split.beta, amp,
                             (split.V[:, 0], split.V[:, 1]), hist, "shoot")


def _check_budget(hist, epsilon):
    peak = float(np.max(hist[:, 1] + hist[:, 3]))
    if peak > epsilon:
        raise BudgetError(f"sup (||phi||_X + ||grad phi||_X) = {peak:.3e} exceeds the budget {epsilon:.3e}")


def fixed_point_ancient(split: UnstableSplit, seed: VectorField, T_back: float, h: float = 0.1,
                        tol: float = 1e-8, maxit: int = 50, epsilon: float = np.inf, keep_every: int = 10,
                        sigma: float = np.nan) -> AncientTrajectory:
    """Picard iteration of the unstable/stable Duhamel split on a uniform time grid.

    phi_u(t) = e^{A_u t} phi_u0 + int_t^0 e^{A_u (t - tau)} P_u P(phi.grad phi) dtau
    phi_s(t) = -int_{-T_back}^t e^{A (t - tau)} P_s P(phi.grad phi) dtau
    Both integrals use the exact exponential with the integrand linear in tau.
    """
    _check_tback(split, T_back)
    times = _time_grid(T_back, h)
    g = split.grid
    amp = x_norm(seed)
    c0 = split.unstable_coords(seed.flat)
    nt = len(times)
    step_u = sla.expm(split.Lam * h)
    c = np.zeros((nt, 2))
    c[0] = sla.expm(split.Lam * times[0]) @ c0
    for k in range(1, nt):
        c[k] = step_u @ c[k - 1]
    lin = c @ split.V.T
    phi = lin.copy()
    e, p1, p2 = split.etd(h)
    eb, i0, q2 = phi_functions(-split.Lam, h)
    i1 = i0 - q2
    kept = [k for k in range(nt) if k % keep_every == 0 or k == nt - 1]
    weight = np.exp(-split.beta * times)
    increments, ratios = [], []
    converged = False
    for it in range(1, maxit + 1):
        nl = np.array([_nonlin(g, phi[k]) for k in range(nt)])  # -P(phi.grad phi)
        n_u = -(nl @ split.Wt.T)
        g_s = nl - (nl @ split.Wt.T) @ split.V.T
        cu = np.zeros((nt, 2))
        cu[-1] = c0
        for k in range(nt - 2, -1, -1):
            cu[k] = eb @ cu[k + 1] + i0 @ n_u[k] + i1 @ (n_u[k + 1] - n_u[k])
        st = np.zeros_like(phi)
        for k in range(nt - 1):
            st[k + 1] = e @ st[k] + p1 @ g_s[k] + p2 @ (g_s[k + 1] - g_s[k])
        new = cu @ split.V.T + st
        if not np.all(np.isfinite(new)):
            raise ContractionError("Picard iterate is not finite")
        diff = max(weight[k] * (x_norm(VectorField.from_flat(g, new[k] - phi[k]))
                                + grad_x_norm(VectorField.from_flat(g, new[k] - phi[k]))) for k in kept)
        phi = new
        increments.append(diff)
        if len(increments) > 1:
            ratios.append(increments[-1] / increments[-2] if increments[-2] > 0 else 0.0)
            if ratios[-1] >= 1:
                raise ContractionError(f"Picard iteration does not contract (ratio {ratios[-1]:.3g})")
        log.debug("Picard %d: W-increment %.3e", it, diff)
        if diff <= tol and it >= 2:
            converged = True
            break
    if not converged:
        raise ContractionError(f"no convergence in {maxit} iterations (last increment {increments[-1]:.3e})")
    fields = [VectorField.from_flat(g, phi[k]) for k in kept]
    hist = _history(times[kept], fields)
    _check_budget(hist, epsilon)
    ratio = ratios[0] if ratios else 0.0
    return AncientTrajectory(sigma, times[kept], fields, split.beta, amp, (split.V[:, 0], split.V[:, 1]),
                             hist, "fixed_point", float(ratio), it, increments)


def w_norm(traj: AncientTrajectory) -> float:
    """sup_t e^{-beta t} (||phi||_X + ||grad phi||_X) over the samples."""
    hist = traj.norm_history
    return float(np.max(np.exp(-traj.beta * hist[:, 0]) * (hist[:, 1] + hist[:, 3])))


def scenario_a_operator(grid, beta: float = BETA_MAX, omega: float = 0.25):
    """Planted operator L with the pair beta +- i omega in place of two Gaussian modes."""
    from .spectra import planted_operator

    return planted_operator(grid, [[beta, omega], [-omega, beta]])
