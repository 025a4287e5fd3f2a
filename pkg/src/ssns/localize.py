"""Localized solutions from truncated scale-invariant data.

Physical solutions are written u = a~ + b~ + u~ with a~(x, t) = t^-1/2 a(x/sqrt t)
the profile, b~ an optional ancient perturbation in the same scaling, and
u~(x, t) = zeta(x/sqrt t, log t) a correction carrying the data.  In
similarity variables

    zeta_s = (L - 1/2 - K(a + b)) zeta - e^{s/2} P(zeta.grad zeta),

and zeta = eta + phi, where eta is a known path carrying the initial data
(the heat flow of compact data, or the frozen truncated tail together with
its heat-equation residual) and phi lies in the decaying class.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .datum import InitialDatum
from .fields import SimilarityGrid, VectorField, advect, gradient_norm_sq, projector, synthesize_profiles
from .grid import RadialGrid, gauss_legendre
from .norms import grad_lp_norm, lp_norm, zT_seminorm
from .heat import channel_kernel, decay_fit, phi_functions
from .operators import Background

log = logging.getLogger(__name__)


class LocalizationError(RuntimeError):
    pass


class CertificateError(LocalizationError):
    """Missing spectral certificate, or abscissa of L - K(a) not below 1/8."""


def _bump(x):
    """psi(x) = exp(-1/x) for x > 0 with psi', psi''."""
    x = np.asarray(x, dtype=float)
    pos = x > 0
    xs = np.where(pos, x, 1.0)
    p = np.where(pos, np.exp(-1.0 / xs), 0.0)
    p1 = np.where(pos, p / xs**2, 0.0)
    p2 = np.where(pos, p * (1.0 / xs**4 - 2.0 / xs**3), 0.0)
    return p, p1, p2


def cutoff(r, R: float):
    """Smooth chi_R = 1 on [0, R], 0 on [2R, inf), with first and second r-derivatives."""
    u = np.asarray(r, dtype=float) / R
    a, a1, a2 = _bump(2.0 - u)
    b, b1, b2 = _bump(u - 1.0)
    # d/dr: a' = -a1 / R, b' = b1 / R
    da, d2a = -a1 / R, a2 / R**2
    db, d2b = b1 / R, b2 / R**2
    s = a + b
    ds, d2s = da + db, d2a + d2b
    chi = a / s
    chi1 = (da * s - a * ds) / s**2
    chi2 = (d2a * s - a * d2s) / s**2 - 2 * ds * (da * s - a * ds) / s**3
    return chi, chi1, chi2


def _channel_laplacian(f, f1, f2, r, l):
    return f2 + 2 * f1 / r - l * (l + 1) * f / r**2


@dataclass(frozen=True)
class TruncatedDatum:
    """v0 = chi_R sigma u0 and w0 = sigma u0 - v0, truncated in the P/T scalars.

    Cutting the scalars rather than the velocity keeps both pieces exactly
    divergence-free; v0 is supported in B_2R and equals sigma u0 on B_R.
    """

    datum: InitialDatum
    R: float

    def scalar_profiles(self, r, lmax: int, part: str = "w0"):
        """P, P', P'', T, T', T'' of the chosen piece, each (lmax, len(r))."""
        r = np.asarray(r, dtype=float)
        chi, c1, c2 = cutoff(r, self.R)
        if part == "w0":
            m, m1, m2 = 1.0 - chi, -c1, -c2
        elif part == "v0":
            m, m1, m2 = chi, c1, c2
        else:
            raise ValueError("part must be 'v0' or 'w0'")
        p, t = self.datum.amplitudes(lmax)
        s = self.datum.sigma
        out = np.zeros((6, lmax, r.size))
        inv, inv1, inv2 = 1 / r, -1 / r**2, 2 / r**3
        for i in range(lmax):
            out[0, i], out[1, i], out[2, i] = s * p[i] * m, s * p[i] * m1, s * p[i] * m2
            out[3, i] = s * t[i] * m * inv
            out[4, i] = s * t[i] * (m1 * inv + m * inv1)
            out[5, i] = s * t[i] * (m2 * inv + 2 * m1 * inv1 + m * inv2)
        return out

    def components(self, r, theta, part: str = "w0"):
        """Spherical velocity components (3, len(r), len(theta))."""
        from .datum import _legendre_row

        r = np.asarray(r, dtype=float)
        mu = np.cos(np.asarray(theta, dtype=float))
        s = np.sin(np.asarray(theta, dtype=float))
        lmax = self.datum.lmax
        P, dP, _, T, _, _ = self.scalar_profiles(r, lmax, part)
        out = np.zeros((3, r.size, mu.size))
        for i in range(lmax):
            l = i + 1
            y, dpl = _legendre_row(l, mu)
            dy = -s * dpl
            out[0] += np.outer(l * (l + 1) * P[i] / r, y)
            out[1] += np.outer(P[i] / r + dP[i], dy)
            out[2] -= np.outer(T[i], dy)
        return out

    def divergence(self, r, theta, part: str = "v0"):
        """div of the piece from its spherical components, by exact differentiation of the scalars."""
        from .datum import _legendre_row

        r = np.asarray(r, dtype=float)
        mu = np.cos(np.asarray(theta, dtype=float))
        lmax = self.datum.lmax
        P, dP, d2P, _, _, _ = self.scalar_profiles(r, lmax, part)
        out = np.zeros((r.size, mu.size))
        for i in range(lmax):
            l = i + 1
            y, _ = _legendre_row(l, mu)
            # (1/r^2) d(r^2 u_r)/dr + angular part of the theta component
            ur_term = l * (l + 1) * (P[i] + r * dP[i]) / r**2
            th_term = -l * (l + 1) * (P[i] / r + dP[i]) / r
            out += np.outer(ur_term + th_term, y)
        return out

    def l4_norm(self, part: str = "w0", nodes: int = 96) -> float:
        """||w0||_{L^4} by Gauss quadrature on [R, 2R] plus the exact homogeneous tail."""
        if part != "w0":
            raise ValueError("only the remainder w0 is in L^4")
        lmax = self.datum.lmax
        mu, wmu = gauss_legendre(4 * lmax + 16)
        th = np.arccos(mu)
        x, wx = gauss_legendre(nodes)
        r = self.R * (1.5 + 0.5 * x)
        wr = 0.5 * self.R * wx
        u = self.components(r, th, part)
        mag4 = np.sum(u**2, axis=0) ** 2
        annulus = 2 * np.pi * np.einsum("i,ij,j->", wr * r**2, mag4, wmu)
        g = self.datum.sigma * self.datum.sphere_values(th)
        sphere = 2 * np.pi * np.dot(wmu, np.sum(g**2, axis=0) ** 2)
        tail = sphere / (2 * self.R)  # int_{2R}^inf r^-4 r^2 dr
        return float((annulus + tail) ** 0.25)

    def l4_constant(self) -> float:
        """C in ||w0||_{L^4} = C R^{-1/4}."""
        return self.l4_norm() * self.R**0.25


def split_datum(datum: InitialDatum, R: float) -> TruncatedDatum:
    if not R >= 1:
        raise ValueError("R must be >= 1")
    return TruncatedDatum(datum, float(R))


def _odd(n: int) -> int:
    return n if n % 2 else n + 1


class HeatPath:
    """eta(y, s) = (e^{t Delta} u0)(sqrt(t) y), t = e^s, for decaying data u0 on the same grid.

    Narrow kernels are resolved on a refined source grid; below the finest
    resolvable time a second-order Taylor expansion in t is used.
    """

    residual_free = True

    def __init__(self, u0: VectorField, t_resolved: float = 0.1, max_order: int = 1601):
        self.u0 = u0
        self.grid = u0.grid
        self.t_resolved = t_resolved
        self.max_order = max_order
        self._lap = None

    def _laplacian_coeffs(self):
        if self._lap is None:
            g = self.grid
            r = g.radial.r
            ops = g.radial_ops
            c1 = np.zeros_like(self.u0.coeffs)
            c2 = np.zeros_like(self.u0.coeffs)
            for i, l in enumerate(g.ls):
                for comp, key in ((0, "P"), (1, "T")):
                    d1, d2 = ops[(key, l)]
                    lap = d2 + np.diag(2 / r) @ d1 - np.diag(l * (l + 1) / r**2)
                    c1[comp, i] = lap @ self.u0.coeffs[comp, i]
                    c2[comp, i] = lap @ c1[comp, i]
            self._lap = (c1, c2)
        return self._lap

    def physical(self, t: float, targets) -> np.ndarray:
        """(e^{t Delta} u0) P/T coefficients at radii ``targets``, shape (2, lmax, n)."""
        g = self.grid
        targets = np.asarray(targets, dtype=float)
        order = _odd(int(np.ceil(g.radial.order * np.sqrt(self.t_resolved / t))))
        out = np.zeros((2, g.lmax, targets.size))
        if order <= g.radial.order or order <= self.max_order:
            src = g.radial if order <= g.radial.order else RadialGrid(order, g.radial.map_scale, g.radial.dim)
            for i, l in enumerate(g.ls):
                vals = self.u0.coeffs[:, i]
                if src is not g.radial:
                    vals = vals @ g.radial.interpolation_matrix(src.r, g.parity(l)).T
                k = channel_kernel(3, l, targets, src.r, t) * src.weights[None, :]
                out[:, i] = vals @ k.T
            return out
        c1, c2 = self._laplacian_coeffs()
        full = self.u0.coeffs + t * c1 + 0.5 * t * t * c2
        for i, l in enumerate(g.ls):
            m = g.radial.interpolation_matrix(targets, g.parity(l))
            out[:, i] = full[:, i] @ m.T
        return out

    def eta(self, s: float) -> Background:
        t = np.exp(s)
        q = np.sqrt(t)
        c = self.physical(t, q * self.grid.radial.r)
        c[0] /= q
        return Background.from_field(VectorField(self.grid, c))

    def residual(self, s: float):
        return None


class TailPath:
    """eta(y, s) = -w0(sqrt(t) y) for the truncated tail, with its heat residual -t (Delta w0)(sqrt(t) y)."""

    residual_free = False

    def __init__(self, trunc: TruncatedDatum, grid: SimilarityGrid):
        self.trunc = trunc
        self.grid = grid

    def entry_time(self) -> float:
        """First s at which the tail reaches the outermost node."""
        return 2 * np.log(self.trunc.R / self.grid.radial.r[-1])

    def _profiles(self, s):
        t = np.exp(s)
        q = np.sqrt(t)
        rho = q * self.grid.radial.r
        P, dP, d2P, T, dT, d2T = self.trunc.scalar_profiles(rho, self.grid.lmax, "w0")
        return t, q, rho, P, dP, d2P, T, dT, d2T

    def eta(self, s: float) -> Background:
        t, q, _, P, dP, d2P, T, dT, _ = self._profiles(s)
        comps = synthesize_profiles(self.grid, -P / q, -dP, -q * d2P, -T, -q * dT, True)
        return Background(self.grid, *comps)

    def residual(self, s: float) -> VectorField:
        t, q, rho, P, dP, d2P, T, dT, d2T = self._profiles(s)
        c = np.zeros((2, self.grid.lmax, self.grid.nr))
        for i, l in enumerate(self.grid.ls):
            c[0, i] = -t / q * _channel_laplacian(P[i], dP[i], d2P[i], rho, l)
            c[1, i] = -t * _channel_laplacian(T[i], dT[i], d2T[i], rho, l)
        return VectorField(self.grid, c)


class SyntheticPerturbation:
    """b(y, s) = eps e^{beta s} b0(y): an exact ancient solution of the linear growth law."""

    def __init__(self, b0: VectorField, eps: float, beta: float = 1.0 / 32):
        self.b0, self.eps, self.beta = b0, float(eps), float(beta)
        self._bg = Background.from_field(b0)

    def __call__(self, s: float) -> Background:
        return self._bg * (self.eps * np.exp(self.beta * s))

    def field(self, s: float) -> VectorField:
        return self.b0 * (self.eps * np.exp(self.beta * s))


class TrajectoryPerturbation:
    """b(s) from a stored ancient trajectory, continued below its first sample by V e^{Lam (s - s0)} c0."""

    def __init__(self, traj, V, Lam):
        self.traj = traj
        self.V = np.asarray(V)
        self.Lam = np.asarray(Lam)
        self.grid = traj.fields[0].grid
        self._c0 = np.linalg.lstsq(self.V, traj.fields[0].flat, rcond=None)[0]

    @classmethod
    def from_split(cls, traj, split):
        return cls(traj, split.V, split.Lam)

    @property
    def beta(self) -> float:
        return float(self.traj.beta)

    def field(self, s: float) -> VectorField:
        tr = self.traj
        if s <= tr.times[0]:
            from scipy.linalg import expm

            vec = self.V @ (expm(self.Lam * (s - tr.times[0])) @ self._c0)
            return VectorField.from_flat(self.grid, vec)
        j = int(np.searchsorted(tr.times, s))
        j = min(max(j, 1), len(tr.times) - 1)
        w = min((s - tr.times[j - 1]) / (tr.times[j] - tr.times[j - 1]), 1.0)
        return tr.fields[j - 1] * (1 - w) + tr.fields[j] * w

    def __call__(self, s: float) -> Background:
        return Background.from_field(self.field(s))


def _cross(p: Background, q: Background) -> VectorField:
    """P(p.grad q + q.grad p)."""
    g = p.grid
    comps = advect(g, p.u, p.ur, p.ut, q.u, q.ur, q.ut) + advect(g, q.u, q.ur, q.ut, p.u, p.ur, p.ut)
    return projector(g)(comps)


def _self(p: Background) -> VectorField:
    return projector(p.grid)(advect(p.grid, p.u, p.ur, p.ut, p.u, p.ur, p.ut))


def background_lp(bg: Background, p: float = 4.0) -> float:
    w = bg.grid.volume_weights
    return float(np.sum(w * np.sum(bg.u**2, axis=0) ** (p / 2)) ** (1 / p))


def certify_abscissa(a, grid: SimilarityGrid | None = None, how_many: int = 6) -> float:
    """Spectral abscissa of L - K(a), to be passed as a certificate."""
    from .spectra import leading_spectrum

    return float(leading_spectrum(a, how_many, grid=grid).abscissa_s)


@dataclass
class LocalizationProblem:
    """phi_s = (L - 1/2 - K(a)) phi + N(phi, s) on (s_start, log T].

    ``a`` is the profile Background (None for a = 0); ``path`` carries the
    data; ``perturbation`` is s -> Background b(s); ``forcing`` is
    s -> VectorField in similarity form.  ``certificate`` is the spectral
    abscissa of L - K(a) and must lie below 1/8 when a is non-zero.
    """

    grid: SimilarityGrid
    a: Background | None = None
    path: object = None
    perturbation: object = None
    forcing: object = None
    certificate: float | None = None
    T: float = 1.0
    t_min: float = 1e-4
    h: float = 0.05
    h_coarse: float = 0.5
    lookback: float = 40.0
    keep_every: int = 4

    def __post_init__(self):
        if self.a is not None and not self.a.is_zero:
            if self.certificate is None:
                raise CertificateError("a spectral abscissa certificate for L - K(a) is required")
            if not self.certificate < 0.125:
                raise CertificateError(f"abscissa {self.certificate:.4g} is not below 1/8")
        if not 0 < self.t_min < self.T:
            raise ValueError("need 0 < t_min < T")
        self._cache: dict = {}

    def operator(self) -> np.ndarray:
        if "A" not in self._cache:
            from .spectra import LinearizedOperator

            a = None if self.a is None or self.a.is_zero else self.a
            op = LinearizedOperator.from_background(a, self.grid)
            self._cache["A"] = op.matrix - 0.5 * np.eye(op.size)
        return self._cache["A"]

    def etd(self, h: float):
        key = ("etd", round(h, 14))
        if key not in self._cache:
            self._cache[key] = phi_functions(self.operator(), h)
        return self._cache[key]

    def time_grid(self):
        """(s nodes, step sizes, index of the first window node)."""
        s_end, s_win = np.log(self.T), np.log(self.t_min)
        s0 = s_win - self.lookback
        entry = getattr(self.path, "entry_time", None)
        if entry is not None and self.forcing is None:
            s0 = max(s0, entry() - self.h_coarse)
        nc = max(int(np.ceil((s_win - s0) / self.h_coarse)), 0)
        coarse = s_win - self.h_coarse * np.arange(nc, 0, -1)
        nf = max(int(np.ceil((s_end - s_win) / self.h)), 1)
        fine = np.linspace(s_win, s_end, nf + 1)
        return np.concatenate([coarse, fine]), nc

    def eta(self, s: float) -> Background:
        if self.path is None:
            return Background.zero(self.grid)
        key = ("eta", s)
        if key not in self._cache:
            self._cache[key] = self.path.eta(s)
        return self._cache[key]

    def source(self, s: float) -> VectorField:
        """Part of N independent of phi and of b: -K(a) eta + heat residual + forcing."""
        key = ("src", s)
        if key not in self._cache:
            g = self.grid
            out = VectorField(g, np.zeros((2, g.lmax, g.nr)))
            if self.a is not None and not self.a.is_zero and self.path is not None:
                out = out - _cross(self.a, self.eta(s))
            if self.path is not None and not self.path.residual_free:
                out = out + self.path.residual(s)
            if self.forcing is not None:
                out = out + self.forcing(s)
            self._cache[key] = out
        return self._cache[key]

    def nonlinear_terms(self, s: float, phi: VectorField, nonlinear: bool = True) -> VectorField:
        """-K(b) zeta - e^{s/2} P(zeta.grad zeta) with zeta = eta + phi."""
        zeta = self.eta(s) + Background.from_field(phi)
        out = VectorField(self.grid, np.zeros_like(phi.coeffs))
        if self.perturbation is not None:
            out = out - _cross(self.perturbation(s), zeta)
        if nonlinear:
            out = out - _self(zeta) * np.exp(s / 2)
        return out



def _z_weighted(grid, t, vec) -> float:
    f = VectorField.from_flat(grid, vec)
    return t**0.375 * (lp_norm(f, 4) + grad_lp_norm(f, 4))


@dataclass
class LocalizedSolution:
    """phi on the kept nodes of the window [t_min, T]; u~ = eta + phi in similarity variables."""

    problem: LocalizationProblem
    s: np.ndarray
    phi: list
    method: str = "stokes"
    iterations: int = 1
    increments: list = field(default_factory=list)
    contraction_ratio: float = np.nan

    @property
    def times(self) -> np.ndarray:
        return np.exp(self.s)

    def zeta(self, k: int) -> Background:
        return self.problem.eta(self.s[k]) + Background.from_field(self.phi[k])

    def history(self) -> np.ndarray:
        """Rows t, ||u~||_{L^4}, ||grad u~||_{L^4} in physical variables."""
        rows = []
        for k, s in enumerate(self.s):
            t = np.exp(s)
            z = self.zeta(k)
            grad = np.sqrt(gradient_norm_sq(z.grid, z.u, z.ur, z.ut))
            g4 = float(np.sum(z.grid.volume_weights * grad**4) ** 0.25)
            rows.append((t, t**0.375 * background_lp(z, 4), t**-0.125 * g4))
        return np.array(rows)

    def z_norm(self) -> float:
        """Z_T size of u~: sup_t (||u~||_4 + t^1/2 ||grad u~||_4) over the samples."""
        h = self.history()
        return zT_seminorm(h[:, 0], h[:, 1], h[:, 2])

    def phi_z_norm(self) -> float:
        g = self.problem.grid
        return max(_z_weighted(g, np.exp(s), f.flat) for s, f in zip(self.s, self.phi))


def _sweep(problem: LocalizationProblem, nodes, nc, nvals):
    """Exponential trapezoid Duhamel sweep from phi = 0 at the first node."""
    n = len(nodes)
    hf = nodes[-1] - nodes[-2]
    x = np.zeros_like(nvals[0])
    out = [x]
    for k in range(n - 1):
        e, p1, p2 = problem.etd(problem.h_coarse if k < nc else hf)
        x = e @ x + p1 @ nvals[k] + p2 @ (nvals[k + 1] - nvals[k])
        out.append(x)
    return np.array(out)


def _kept(n, nc, every):
    return [k for k in range(nc, n) if (k - nc) % every == 0 or k == n - 1]


def solve_singular_stokes(problem: LocalizationProblem) -> LocalizedSolution:
    """Linear problem: phi(s) = int e^{(L - K(a) - 1/2)(s - tau)} (-K(a) eta + g)(tau) dtau.

    With eta the heat flow of the data this is the Duhamel formula for
    u_t - Delta u + P(a~.grad u + u.grad a~) = f with u = e^{t Delta} u0 + phi.
    """
    nodes, nc = problem.time_grid()
    nvals = np.array([problem.source(s).flat for s in nodes])
    phi = _sweep(problem, nodes, nc, nvals)
    if not np.all(np.isfinite(phi)):
        raise LocalizationError("Stokes sweep is not finite")
    keep = _kept(len(nodes), nc, problem.keep_every)
    g = problem.grid
    return LocalizedSolution(problem, nodes[keep], [VectorField.from_flat(g, phi[k]) for k in keep])


def solve_perturbed_nse(problem: LocalizationProblem, tol: float = 1e-8, maxit: int = 30,
                        nonlinear: bool = True) -> LocalizedSolution:
    """Picard iteration of the Duhamel map for the full correction equation."""
    nodes, nc = problem.time_grid()
    g = problem.grid
    src = np.array([problem.source(s).flat for s in nodes])
    keep = _kept(len(nodes), nc, problem.keep_every)
    check = list(range(nc)) + keep
    phi = np.zeros_like(src)
    increments, converged = [], False
    for it in range(1, maxit + 1):
        nvals = src + np.array([problem.nonlinear_terms(s, VectorField.from_flat(g, phi[k]), nonlinear).flat
                                for k, s in enumerate(nodes)])
        new = _sweep(problem, nodes, nc, nvals)
        if not np.all(np.isfinite(new)):
            raise LocalizationError("Picard iterate is not finite")
        diff = max(_z_weighted(g, np.exp(nodes[k]), new[k] - phi[k]) for k in check)
        phi = new
        increments.append(diff)
        log.debug("localized Picard %d: Z-increment %.3e", it, diff)
        if len(increments) > 2 and increments[-1] >= increments[-2] and increments[-1] > tol:
            raise LocalizationError(f"Picard iteration does not contract (increments {increments[-2:]})")
        if diff <= tol and it >= 3:
            converged = True
            break
    if not converged:
        raise LocalizationError(f"no convergence in {maxit} iterations (last increment {increments[-1]:.3e})")
    ratio = increments[2] / increments[1] if increments[1] > 0 else 0.0
    return LocalizedSolution(problem, nodes[keep], [VectorField.from_flat(g, phi[k]) for k in keep],
                             "picard", it, increments, float(ratio))


def tail_bound(problem: LocalizationProblem) -> float:
    """Size of the dropped Duhamel tail, e^{(beta_1 - 1/2) lookback}."""
    beta1 = problem.certificate if problem.certificate is not None else -0.5
    return float(np.exp((beta1 - 0.5) * problem.lookback))


def solve_with_shrink(problem: LocalizationProblem, **kw) -> LocalizedSolution:
    """solve_perturbed_nse, retrying once on a halved horizon if the iteration fails to contract."""
    try:
        return solve_perturbed_nse(problem, **kw)
    except LocalizationError as exc:
        log.warning("%s; retrying with T = %.4g", exc, problem.T / 2)
        smaller = LocalizationProblem(**{**_fields(problem), "T": problem.T / 2})
        return solve_perturbed_nse(smaller, **kw)


def _fields(problem):
    from dataclasses import fields as dc_fields

    return {f.name: getattr(problem, f.name) for f in dc_fields(problem)}


def attainment(sol: LocalizedSolution) -> np.ndarray:
    """Rows t, ||u(t) - u0||_{L^4} for heat-path data, computed at x = sqrt(t) y."""
    path = sol.problem.path
    if not isinstance(path, HeatPath):
        raise TypeError("attainment needs compactly supported data (HeatPath)")
    g = sol.problem.grid
    rows = []
    for s, phi in zip(sol.s, sol.phi):
        t = np.exp(s)
        q = np.sqrt(t)
        heat = path.physical(t, q * g.radial.r)
        start = np.zeros_like(heat)
        for i, l in enumerate(g.ls):
            start[:, i] = path.u0.coeffs[:, i] @ path.grid.radial.interpolation_matrix(q * g.radial.r, g.parity(l)).T
        diff = heat - start
        diff[0] /= q
        rows.append((t, t**0.375 * lp_norm(VectorField(g, diff) + phi, 4)))
    return np.array(rows)


def interpolation_ratio(f: VectorField) -> float:
    """sup|f| / (||f||_4^{1/4} ||grad f||_4^{3/4}); scale invariant, bounded by the sharp constant."""
    from .fields import synthesize

    u = synthesize(f.grid, f.coeffs)
    sup = float(np.sqrt(np.sum(u**2, axis=0)).max())
    return sup / (lp_norm(f, 4) ** 0.25 * grad_lp_norm(f, 4) ** 0.75)


@dataclass
class SeparationReport:
    R: float
    T: float
    sep_exponent: float
    target_exponent: float
    times: np.ndarray
    sep_values: np.ndarray
    l2_sup: tuple
    zT_constants: dict
    fit_window: tuple = (np.nan, np.nan)

    def to_json(self) -> dict:
        return {"R": self.R, "T": self.T, "sep_exponent": self.sep_exponent,
                "target_exponent": self.target_exponent,
                "sep_times": [float(t) for t in self.times],
                "sep_values": [float(v) for v in self.sep_values],
                "l2_sup": [float(v) for v in self.l2_sup], "zT_constants": self.zT_constants,
                "fit_window": [float(v) for v in self.fit_window]}


def synthetic_perturbation(grid: SimilarityGrid, eps: float = 1e-3, beta: float = 1.0 / 32,
                           comp: int = 1, l: int = 1) -> SyntheticPerturbation:
    """b = eps e^{beta s} b0 with b0 a Gaussian mode scaled to ||b0||_X + ||grad b0||_X = 1."""
    from .norms import grad_x_norm, x_norm
    from .spectra import gaussian_mode

    vec, _ = gaussian_mode(grid, comp, l)
    b0 = VectorField.from_flat(grid, vec)
    b0 = b0 * (1.0 / (x_norm(b0) + grad_x_norm(b0)))
    return SyntheticPerturbation(b0, eps, beta)


def _energy(sol: LocalizedSolution, a: Background, pert) -> np.ndarray:
    """||u(t)||_{L^2} for u = t^-1/2 (a + b + sqrt(t) zeta)(x / sqrt t)."""
    out = []
    for k, s in enumerate(sol.s):
        t = np.exp(s)
        tot = a + sol.zeta(k) * np.sqrt(t)
        if pert is not None:
            tot = tot + pert(s)
        out.append(t**0.25 * background_lp(tot, 2))
    return np.array(out)


def _field_channels(f: VectorField, r) -> np.ndarray:
    """P, P', T of a decaying field at arbitrary radii, (3, lmax, len(r))."""
    g = f.grid
    out = np.zeros((3, g.lmax, r.size))
    for i, l in enumerate(g.ls):
        par = g.parity(l)
        d1 = g.radial_ops[("P", l)][0]
        inter = g.radial.interpolation_matrix(r, par)
        out[0, i] = inter @ f.coeffs[0, i]
        out[1, i] = g.radial.interpolation_matrix(r, -par) @ (d1 @ f.coeffs[0, i])
        out[2, i] = inter @ f.coeffs[1, i]
    return out


def channel_l2(r, w, P, dP, T) -> float:
    """L^2 norm of an axisymmetric P/T field from its channel profiles and radial weights."""
    total = 0.0
    for i in range(P.shape[0]):
        l = i + 1
        ll = l * (l + 1)
        dens = ll * ll * (P[i] / r) ** 2 + ll * ((P[i] / r + dP[i]) ** 2 + T[i] ** 2)
        total += 4 * np.pi / (2 * l + 1) * np.sum(w * r**2 * dens)
    return float(np.sqrt(total))


def _energy_rule(marks, top: float, nodes: int = 24):
    """Composite Gauss rule on [0, top]: [0, 1], then octaves, split at ``marks``."""
    edges = {0.0, 1.0, *(m for m in marks if 1.0 < m < top)}
    e = 1.0
    while e < top:
        e *= 2.0
        edges.add(min(e, top))
    edges = np.array(sorted(edges))
    x, wx = gauss_legendre(nodes)
    lo, hi = edges[:-1, None], edges[1:, None]
    r = (0.5 * (lo + hi) + 0.5 * (hi - lo) * x[None, :]).ravel()
    w = (0.5 * (hi - lo) * wx[None, :]).ravel()
    return r, w


def profile_energy(sol: LocalizedSolution, profile, pert=None) -> np.ndarray:
    """||u(t)||_{L^2} from channel profiles on a rule that resolves the cutoff annulus at every t.

    u = t^-1/2 (a + b + sqrt(t) zeta)(x / sqrt t) with a = sigma e^Delta u0 + phi_a;
    the heat part and the tail path are evaluated in closed form, the
    decaying parts by interpolation.  The rule stops at the outermost node:
    past it the interpolant of a decaying field is pure extrapolation.
    """
    path = sol.problem.path
    datum = profile.datum.with_sigma(profile.sigma)
    lmax = sol.problem.grid.lmax
    out = []
    for k, s in enumerate(sol.s):
        t = np.exp(s)
        q = np.sqrt(t)
        marks = [] if path is None else [path.trunc.R / q, 2 * path.trunc.R / q]
        r, w = _energy_rule(marks, sol.problem.grid.radial.r[-1])
        heat = datum.channel_profiles(r, lmax)
        P, dP, T = heat[0], heat[1], heat[3]
        for f, c in ((profile.phi, 1.0), (sol.phi[k], q)):
            ch = _field_channels(f, r)
            P, dP, T = P + c * ch[0], dP + c * ch[1], T + c * ch[2]
        if pert is not None:
            ch = _field_channels(pert.field(s), r)
            P, dP, T = P + ch[0], dP + ch[1], T + ch[2]
        if isinstance(path, TailPath):
            Pw, dPw, _, Tw, _, _ = path.trunc.scalar_profiles(q * r, lmax, "w0")
            # sqrt(t) eta: P -> -P_w(q r), P' -> -q P_w'(q r), T -> -q T_w(q r)
            P, dP, T = P - Pw, dP - q * dPw, T - q * Tw
        out.append(t**0.25 * channel_l2(r, w, P, dP, T))
    return np.array(out)


def nonuniqueness_certificate(a: Background, trunc: TruncatedDatum, perturbation, certificate: float,
                              T: float = 1.0, t_min: float = 1e-4, h: float = 0.05,
                              fit_window: tuple | None = None, workers: int | None = None,
                              tol: float = 1e-8, profile=None) -> SeparationReport:
    """Two localized solutions from the same v0: around a~ and around a~ + b~.

    The separation ||u_1(t) - u_2(t)||_{L^4} = t^{3/8} ||t^{-1/2} b + phi_2 - phi_1||_{L^4_y}
    is fitted against t on ``fit_window`` (default: the lower half of the
    window in log t); for b ~ e^{beta s} the exponent is beta - 1/8.
    Passing the ``profile`` behind ``a`` enables the annulus-resolving
    energy quadrature; otherwise energies use the similarity grid.
    """
    from concurrent.futures import ThreadPoolExecutor

    from .config import worker_count

    grid = a.grid
    base = dict(grid=grid, a=a, path=TailPath(trunc, grid), certificate=certificate, T=T, t_min=t_min, h=h)
    probs = [LocalizationProblem(**base), LocalizationProblem(**base, perturbation=perturbation)]
    with ThreadPoolExecutor(max_workers=workers or worker_count()) as pool:
        sols = list(pool.map(lambda p: solve_perturbed_nse(p, tol=tol), probs))
    s1, s2 = sols
    times = s1.times
    sep = []
    for k, s in enumerate(s1.s):
        t = np.exp(s)
        diff = s2.phi[k] - s1.phi[k]
        if perturbation is not None:
            diff = diff + perturbation.field(s) * (1 / np.sqrt(t))
        sep.append(t**0.375 * lp_norm(diff, 4))
    sep = np.array(sep)
    if fit_window is None:
        fit_window = (t_min, np.sqrt(t_min * T))
    beta = getattr(perturbation, "beta", np.nan)
    if perturbation is None or not np.any(sep > 0):
        exponent = np.nan
    else:
        exponent = decay_fit(times, sep, window=fit_window, log_time=True).slope
    if profile is not None:
        l2 = (float(profile_energy(s1, profile).max()), float(profile_energy(s2, profile, perturbation).max()))
    else:
        l2 = (float(_energy(s1, a, None).max()), float(_energy(s2, a, perturbation).max()))
    consts = {"w0_l4_times_R_quarter": trunc.l4_constant(), "z_run1": s1.z_norm(), "z_run2": s2.z_norm(),
              "contraction_run1": s1.contraction_ratio, "contraction_run2": s2.contraction_ratio,
              "tail_bound": tail_bound(probs[0])}
    return SeparationReport(trunc.R, T, float(exponent), float(beta - 0.125), times, sep, l2, consts,
                            tuple(fit_window))
