"""Heat flow, the drift semigroup e^{Ls} and its perturbations.

The drift operator is L = Delta + (y/2).grad + 1/2 in similarity variables.
On a poloidal scalar it acts as D_l P + (r/2) P' and on a toroidal scalar
as D_l T + (r/2) T' + T/2, with D_l the radial part of the Laplacian for
Legendre degree l.  Two independent evaluations of e^{Ls} are provided:
the exact heat-kernel substitution

    phi(y, s) = e^{s/2} h(e^{s/2} y, e^s - 1),   h = heat flow of phi_0,

and matrix exponentials of the collocation operator.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
from scipy.special import ive

from .fields import ScalarField, SimilarityGrid, VectorField, projector
from .grid import RadialGrid
from .operators import KOperator

log = logging.getLogger(__name__)


class HeatResolutionError(RuntimeError):
    """Raised when the Gaussian kernel is not resolved by the grid."""


def _ive(nu: float, z):
    """Scaled Bessel I with the large-argument expansion where scipy gives up."""
    out = ive(nu, np.minimum(z, 1e7))
    big = z > 1e7
    if np.any(big):
        zb = z[big]
        m = 4 * nu * nu
        out[big] = (1 - (m - 1) / (8 * zb) + (m - 1) * (m - 9) / (128 * zb**2)) / np.sqrt(2 * np.pi * zb)
    return out


def channel_kernel(dim: int, l: int, targets, sources, t: float) -> np.ndarray:
    """Radial heat kernel for the degree-l zonal channel in R^dim.

    Acting on f(s) Y_l, e^{t Delta} returns Y_l times int K(r, s) f(s) s^(dim-1) ds.
    """
    r = np.asarray(targets, dtype=float)
    s = np.asarray(sources, dtype=float)
    z = np.outer(r, s) / (2 * t)
    gauss = np.exp(-np.subtract.outer(r, s) ** 2 / (4 * t))
    nu = dim / 2 - 1 + l
    return (4 * np.pi * t) ** (-dim / 2) * (2 * np.pi) ** (dim / 2) * gauss * z ** (1 - dim / 2) * _ive(nu, z)


def _kernel_matrix(grid: RadialGrid, l: int, scale: float, t: float, values=None, tol: float = 1e-6):
    """Quadrature matrix of the channel kernel at targets scale * r, checked for resolution.

    A point mass at a source node must keep unit mass after the flow; the
    mass defect of each column, averaged against the size of the data,
    estimates the quadrature error and flags kernels that are too narrow
    for the node spacing or spread beyond the resolved part of the grid.
    """
    targets = scale * grid.r
    mat = channel_kernel(grid.dim, l, targets, grid.r, t) * grid.weights[None, :]
    if values is not None:
        mag = np.abs(values).max(axis=0) if np.ndim(values) > 1 else np.abs(values)
        mass = np.dot(grid.weights, mag)
        if mass > 0:
            k0 = channel_kernel(grid.dim, 0, targets, grid.r, t)
            colsum = (scale**grid.dim * grid.weights) @ k0
            err = float(np.dot(grid.weights * mag, np.abs(colsum - 1.0)) / mass)
            if err > tol:
                raise HeatResolutionError(
                    f"heat kernel at t={t:.3g} under-resolved on the grid (defect {err:.2e})"
                )
    return mat


def heat_evolve(u0, t: float, tol: float = 1e-6):
    """e^{t Delta} u0 by Gaussian convolution on the mapped grid."""
    if t < 0:
        raise ValueError("t must be >= 0")
    if t == 0:
        return u0
    if isinstance(u0, VectorField):
        g = u0.grid
        out = np.zeros_like(u0.coeffs)
        for i, l in enumerate(g.ls):
            mat = _kernel_matrix(g.radial, l, 1.0, t, u0.coeffs[:, i], tol)
            out[:, i] = u0.coeffs[:, i] @ mat.T
        return VectorField(g, out)
    g = u0.grid
    mat = _kernel_matrix(g, u0.l, 1.0, t, u0.values, tol)
    return ScalarField(g, mat @ u0.values, u0.l)


def semigroup_L(phi0, s: float, tol: float = 1e-6):
    """e^{Ls} phi0 through the heat substitution (no time stepping)."""
    if s < 0:
        raise ValueError("s must be >= 0")
    if s == 0:
        return phi0
    t = np.expm1(s)
    q = np.exp(s / 2)
    if isinstance(phi0, VectorField):
        g = phi0.grid
        out = np.zeros_like(phi0.coeffs)
        for i, l in enumerate(g.ls):
            mat = _kernel_matrix(g.radial, l, q, t, phi0.coeffs[:, i], tol)
            out[0, i] = mat @ phi0.coeffs[0, i]
            out[1, i] = q * (mat @ phi0.coeffs[1, i])
        return VectorField(g, out)
    g = phi0.grid
    mat = _kernel_matrix(g, phi0.l, q, t, phi0.values, tol)
    return ScalarField(g, q * (mat @ phi0.values), phi0.l)


def radial_block(grid: RadialGrid, l: int, zeros: int, shift: float, drift: bool = True) -> np.ndarray:
    """Collocation matrix of D_l + (r/2) d/dr + shift in R^dim on folded nodes."""
    p = -1 if l % 2 else 1
    d1, d2 = grid.diff(p, zeros)
    r = grid.r
    n = grid.dim
    mat = d2 + ((n - 1) / r)[:, None] * d1 - np.diag(l * (l + n - 2) / r**2)
    if drift:
        mat = mat + (r / 2)[:, None] * d1
    return mat + shift * np.eye(grid.size)


class DriftOperator:
    """Block-diagonal collocation form of L on a SimilarityGrid."""

    def __init__(self, grid: SimilarityGrid):
        self.grid = grid
        self.blocks = []
        for kind, zeros, shift in (("P", 1, 0.0), ("T", 2, 0.5)):
            for l in grid.ls:
                self.blocks.append(radial_block(grid.radial, l, zeros, shift))
        self._expm_cache: dict = {}

    @property
    def size(self) -> int:
        return self.grid.n_dof

    def matrix(self) -> np.ndarray:
        return sla.block_diag(*self.blocks)

    def apply(self, vec) -> np.ndarray:
        v = np.asarray(vec).reshape(len(self.blocks), -1)
        return np.concatenate([b @ x for b, x in zip(self.blocks, v)])

    def __call__(self, field: VectorField) -> VectorField:
        return VectorField.from_flat(self.grid, self.apply(field.flat))

    def expm(self, h: float) -> list:
        key = round(float(h), 15)
        if key not in self._expm_cache:
            self._expm_cache[key] = [sla.expm(b * h) for b in self.blocks]
        return self._expm_cache[key]

    def propagate(self, vec, h: float) -> np.ndarray:
        v = np.asarray(vec).reshape(len(self.blocks), -1)
        return np.concatenate([e @ x for e, x in zip(self.expm(h), v)])


_DRIFT: dict = {}


def drift_operator(grid: SimilarityGrid) -> DriftOperator:
    if grid not in _DRIFT:
        _DRIFT[grid] = DriftOperator(grid)
    return _DRIFT[grid]


def phi_functions(mat: np.ndarray, h: float):
    """e^{hA}, h phi1(hA), h phi2(hA) via one augmented exponential."""
    n = mat.shape[0]
    big = np.zeros((3 * n, 3 * n))
    big[:n, :n] = h * mat
    big[:n, n : 2 * n] = h * np.eye(n)
    big[n : 2 * n, 2 * n :] = np.eye(n)
    e = sla.expm(big)
    return e[:n, :n], e[:n, n : 2 * n], e[:n, 2 * n :]


class ExpIntegrator:
    """Exponential time differencing for phi' = L phi + N(phi, s).

    The stiff diffusion-drift part is integrated exactly per channel block;
    N is explicit.  order 1 is exponential Euler, order 2 is ETD2RK.
    """

    def __init__(self, drift: DriftOperator, h: float, order: int = 2):
        if not h > 0:
            raise ValueError("time step must be positive")
        if order not in (1, 2):
            raise ValueError("scheme order must be 1 or 2")
        self.drift = drift
        self.h = float(h)
        self.order = order
        self._funcs = [phi_functions(b, self.h) for b in drift.blocks]
        self.nb = len(drift.blocks)

    def _apply(self, which: int, vec):
        v = np.asarray(vec).reshape(self.nb, -1)
        return np.concatenate([f[which] @ x for f, x in zip(self._funcs, v)])

    def step(self, vec, nonlin, s: float):
        n0 = nonlin(vec, s)
        a = self._apply(0, vec) + self._apply(1, n0)
        if self.order == 1:
            return a
        n1 = nonlin(a, s + self.h)
        return a + self._apply(2, n1 - n0)


@dataclass(frozen=True)
class PropagatorSpec:
    """Settings for e^{(L - K(a)) s}; ``a = None`` is the pure drift."""

    a: object = None  # Background
    time_step: float = 0.01
    scheme: str = "IMEX2"
    safety: float = 0.5

    def __post_init__(self):
        if not self.time_step > 0:
            raise ValueError("time_step must be positive")
        if self.scheme not in ("IMEX1", "IMEX2", "exact"):
            raise ValueError(f"unknown scheme {self.scheme!r}")

    @property
    def order(self) -> int:
        return 1 if self.scheme == "IMEX1" else 2


class CFLError(RuntimeError):
    pass


def _cfl_step(spec: PropagatorSpec, grid: SimilarityGrid) -> tuple[float, int]:
    """Largest step <= time_step keeping the explicit transport CFL below the safety factor."""
    h = spec.time_step
    if spec.a is None or spec.a.is_zero:
        return h, 1
    r = grid.radial.r
    dr = np.diff(np.concatenate([[0.0], r]))
    speed = np.sqrt(np.sum(spec.a.u**2, axis=0)).max(axis=1)
    courant = float(np.max(speed / dr))
    grad = float(np.sqrt(np.sum(spec.a.ur**2, axis=0)).max())
    rate = max(courant, grad)
    sub = 1
    while h / sub * rate > spec.safety:
        sub *= 2
        if sub > 4096:
            raise CFLError("transport term too stiff for explicit treatment")
    if sub > 1:
        log.info("CFL: substepping by %d (rate %.3g)", sub, rate)
    return h / sub, sub


_INTEGRATORS: dict = {}


def _integrator(grid, h, order):
    key = (grid, round(h, 15), order)
    if key not in _INTEGRATORS:
        _INTEGRATORS[key] = ExpIntegrator(drift_operator(grid), h, order)
    return _INTEGRATORS[key]


def _as_solenoidal(phi0, grid=None, tol: float = 1e-8) -> VectorField:
    if isinstance(phi0, VectorField):
        return phi0
    comps = np.asarray(phi0)
    proj = projector(grid)(comps)
    back = proj.components()
    err = np.abs(back - comps).max() / max(np.abs(comps).max(), 1e-300)
    if err > tol:
        raise ValueError(f"initial field is not solenoidal (defect {err:.2e})")
    return proj


def semigroup_La(spec: PropagatorSpec, phi0, s: float, samples: int = 0, grid=None):
    """e^{(L - K(a)) s} phi0; returns (phi(s), times, sampled fields).

    ``samples`` > 0 keeps that many equally spaced snapshots (plus s = 0).
    """
    phi0 = _as_solenoidal(phi0, grid)
    g = phi0.grid
    if s < 0:
        raise ValueError("s must be >= 0")
    times = [0.0]
    snaps = [phi0]
    if s == 0:
        return phi0, np.array(times), snaps
    kop = KOperator(spec.a) if spec.a is not None else None
    if spec.scheme == "exact":
        mat = drift_operator(g).matrix()
        if kop is not None:
            mat = mat - kop.matrix()
        marks = np.linspace(0, s, samples + 1)[1:] if samples else np.array([s])
        out = [VectorField.from_flat(g, sla.expm(mat * m) @ phi0.flat) for m in marks]
        return out[-1], np.concatenate([[0.0], marks]), snaps + out
    nsteps = max(1, int(round(s / spec.time_step)))
    h0 = s / nsteps
    h, sub = _cfl_step(PropagatorSpec(spec.a, h0, spec.scheme, spec.safety), g)
    integ = _integrator(g, h, spec.order)
    if kop is None or kop.bg.is_zero:
        nonlin = lambda v, t: np.zeros_like(v)
    else:
        nonlin = lambda v, t: -kop.apply(v)
    every = max(1, nsteps // samples) if samples else None
    vec = phi0.flat.astype(complex if np.iscomplexobj(phi0.coeffs) else float)
    for k in range(nsteps):
        for _ in range(sub):
            vec = integ.step(vec, nonlin, k * h0)
        if every and ((k + 1) % every == 0 or k + 1 == nsteps):
            times.append((k + 1) * h0)
            snaps.append(VectorField.from_flat(g, vec.copy()))
    out = VectorField.from_flat(g, vec)
    return out, np.array(times), snaps


class BandProximityError(ValueError):
    """lambda too close to the essential band Re(lambda) <= -1/4."""


BAND_EDGE = -0.25


class Resolvent:
    """(L - lambda)^{-1} from the heat representation, refined by Krylov iteration.

    The Laplace transform of the drift semigroup gives

        (L - lambda)^{-1} f = - int_0^inf e^{-lambda tau} e^{L tau} f dtau,

    which is the Duhamel formula for the heat problem with source
    t^{-3/2 + lambda} f(x / sqrt t) read off at t = 1 after the substitution
    t = e^{-tau}.  The integral is evaluated channel by channel with the
    heat kernel on geometrically graded Gauss panels (matrix exponentials
    on the first short panel, where the kernel is narrower than the grid),
    and the result preconditions GMRES on the collocation operator.
    """

    def __init__(self, grid: SimilarityGrid, lam: complex, margin: float = 0.05,
                 horizon: float = 40.0, ratio: float = 1.2, tau0: float = 0.1):
        lam = complex(lam)
        if lam.real < BAND_EDGE + margin:
            raise BandProximityError(
                f"Re lambda = {lam.real:g} is within {margin:g} of the essential band edge -1/4"
            )
        self.grid = grid
        self.lam = lam
        self.drift = drift_operator(grid)
        nodes, weights = self._graded_nodes(horizon, ratio, tau0)
        self._pre = self._laplace_blocks(nodes, weights, tau0)

    @staticmethod
    def _graded_nodes(horizon, ratio, tau0, per_panel: int = 8):
        x, w = np.polynomial.legendre.leggauss(per_panel)
        edges = [tau0]
        step = tau0 * (ratio - 1) * 4
        while edges[-1] < horizon:
            edges.append(min(horizon, edges[-1] + step))
            step *= ratio
        nodes, wts = [], []
        for a, b in zip(edges[:-1], edges[1:]):
            nodes.append((b - a) / 2 * x + (a + b) / 2)
            wts.append((b - a) / 2 * w)
        return np.concatenate(nodes), np.concatenate(wts)

    def _kernel_prop(self, l, toroidal, tau, cache, tmax: float = 5.0):
        key = (l, toroidal, round(tau, 14))
        if key in cache:
            return cache[key]
        if tau > tmax:
            out = self._kernel_prop(l, toroidal, tmax, cache) @ self._kernel_prop(l, toroidal, tau - tmax, cache)
        else:
            q = np.exp(tau / 2)
            out = _kernel_matrix(self.grid.radial, l, q, np.expm1(tau))
            if toroidal:
                out = q * out
        cache[key] = out
        return out

    def _laplace_blocks(self, nodes, weights, tau0):
        lam = self.lam
        x, w = np.polynomial.legendre.leggauss(12)
        short = (x + 1) * tau0 / 2
        wshort = w * tau0 / 2
        blocks = []
        cache: dict = {}
        nl = self.grid.lmax
        for k, blk in enumerate(self.drift.blocks):
            toroidal = k >= nl
            l = self.grid.ls[k % nl]
            acc = np.zeros(blk.shape, dtype=complex)
            for tau, wt in zip(short, wshort):
                acc += wt * np.exp(-lam * tau) * sla.expm(blk * tau)
            for tau, wt in zip(nodes, weights):
                acc += wt * np.exp(-lam * tau) * self._kernel_prop(l, toroidal, tau, cache)
            blocks.append(-acc)
        return blocks

    def precondition(self, vec):
        v = np.asarray(vec).reshape(len(self._pre), -1)
        return np.concatenate([m @ x for m, x in zip(self._pre, v)])

    def solve(self, f: VectorField, rtol: float = 1e-13, maxiter: int = 200) -> VectorField:
        from scipy.sparse.linalg import LinearOperator, gmres

        rhs = f.flat.astype(complex).reshape(len(self._pre), -1)
        out = np.zeros_like(rhs)
        n = rhs.shape[1]
        for k, (blk, pre) in enumerate(zip(self.drift.blocks, self._pre)):
            b = rhs[k]
            if not np.any(b):
                continue
            shifted = blk - self.lam * np.eye(n)
            # right preconditioning: solve (A M) z = b, x = M z
            op = LinearOperator((n, n), matvec=lambda z, s=shifted, m=pre: s @ (m @ z), dtype=complex)
            z, info = gmres(op, b, x0=b, rtol=rtol, atol=0.0,
                            restart=n, maxiter=maxiter)
            if info != 0:
                log.warning("resolvent GMRES did not converge in block %d (info=%d)", k, info)
            out[k] = pre @ z
        vals = out.reshape(-1)
        if not np.iscomplexobj(f.coeffs) and self.lam.imag == 0:
            vals = vals.real
        return VectorField.from_flat(self.grid, vals)

    def residual(self, phi: VectorField, f: VectorField) -> VectorField:
        res = self.drift.apply(phi.flat) - self.lam * phi.flat - f.flat
        return VectorField.from_flat(self.grid, res)


def resolvent_solve(lam: complex, f: VectorField, margin: float = 0.05) -> VectorField:
    """phi with (L - lambda) phi = f, refusing lambda near the band Re <= -1/4."""
    return Resolvent(f.grid, lam, margin).solve(f)


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    r2: float
    stderr: float
    n: int


def decay_fit(times, values, window=None, log_time: bool = False) -> DecayFit:
    """Least-squares slope of log(value) against t (or log t)."""
    from scipy.stats import linregress

    t = np.asarray(times, dtype=float)
    v = np.asarray(values, dtype=float)
    if window is not None:
        lo, hi = window
        keep = (t >= lo) & (t <= hi)
        t, v = t[keep], v[keep]
    if t.size < 8:
        raise ValueError(f"need at least 8 samples in the window, got {t.size}")
    if np.any(v <= 0) or not np.all(np.isfinite(v)):
        raise ValueError("values must be positive and finite")
    x = np.log(t) if log_time else t
    if np.ptp(x) == 0:
        raise ValueError("degenerate window")
    fit = linregress(x, np.log(v))
    return DecayFit(float(fit.slope), float(fit.intercept), float(fit.rvalue**2), float(fit.stderr), int(t.size))


def norm_history(times, fields):
    """Rows (t, l2, l4, x_norm, grad_x_norm) for a sequence of fields."""
    from .norms import grad_x_norm, lp_norm

    rows = []
    for t, f in zip(times, fields):
        l2, l4 = lp_norm(f, 2), lp_norm(f, 4)
        rows.append((float(t), l2, l4, l2 + l4, grad_x_norm(f)))
    return rows
