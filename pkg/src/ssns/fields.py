"""Axisymmetric divergence-free vector fields in poloidal/toroidal form.

A field is stored as radial profiles ``P_l(r)`` and ``T_l(r)`` for Legendre
degrees ``l = 1..lmax`` with

    u = curl curl (P y) + curl (T y),   P = sum P_l(r) P_l(cos th), ...

so it is divergence-free by construction.  ``P_l`` and ``T_l`` have parity
(-1)^l in the signed radius.  ``P_l`` vanishes at infinity to first order and
``T_l`` to second order, which keeps the discrete space inside L^2 and L^4.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from math import gamma

import numpy as np
from numpy.polynomial import legendre

from .grid import GridError, RadialGrid, gauss_legendre


@dataclass(frozen=True)
class SimilarityGrid:
    """Meridional (r, theta) grid for axisymmetric vector fields in R^3."""

    radial: RadialGrid
    lmax: int = 6
    n_theta: int | None = None

    def __post_init__(self):
        if self.lmax < 1:
            raise GridError("lmax must be >= 1")
        if self.radial.dim != 3:
            raise GridError("vector fields live in R^3")

    @property
    def kind(self) -> str:
        return "axisymmetric"

    @property
    def nr(self) -> int:
        return self.radial.size

    @property
    def nt(self) -> int:
        # exact angular quadrature for cubic products of lmax modes
        return self.n_theta or max(8, (3 * self.lmax) // 2 + 2)

    @property
    def ls(self) -> np.ndarray:
        return np.arange(1, self.lmax + 1)

    @property
    def n_dof(self) -> int:
        return 2 * self.lmax * self.nr

    @cached_property
    def mu(self):
        return gauss_legendre(self.nt)[0]

    @cached_property
    def mu_weights(self):
        return gauss_legendre(self.nt)[1]

    @cached_property
    def sin_theta(self):
        return np.sqrt(1.0 - self.mu**2)

    @cached_property
    def cot_theta(self):
        return self.mu / self.sin_theta

    @cached_property
    def legendre_tables(self):
        """Y_l(mu), dY_l/dtheta and d2Y_l/dtheta2 at the angular nodes, (lmax, nt)."""
        y = np.zeros((self.lmax, self.nt))
        dy = np.zeros_like(y)
        d2y = np.zeros_like(y)
        s = self.sin_theta
        for i, l in enumerate(self.ls):
            c = np.zeros(l + 1)
            c[l] = 1.0
            y[i] = legendre.legval(self.mu, c)
            p1 = legendre.legval(self.mu, legendre.legder(c))
            p2 = legendre.legval(self.mu, legendre.legder(c, 2))
            dy[i] = -s * p1
            d2y[i] = s * s * p2 - self.mu * p1
        return y, dy, d2y

    @cached_property
    def norms_l(self):
        """Angular norms: int Y_l^2 dmu and int (dY_l/dtheta)^2 dmu."""
        ls = self.ls
        n0 = 2.0 / (2 * ls + 1)
        return n0, ls * (ls + 1) * n0

    @cached_property
    def volume_weights(self):
        """Quadrature weights for int_{R^3} f dx on the (r, mu) nodes, (nr, nt)."""
        return 2 * np.pi * np.outer(self.radial.weights, self.mu_weights)

    def parity(self, l: int) -> int:
        return 1 if l % 2 == 0 else -1

    @cached_property
    def radial_ops(self):
        """Per-degree first/second derivative matrices for P (1 zero) and T (2 zeros)."""
        ops = {}
        for l in self.ls:
            p = self.parity(l)
            ops[("P", l)] = self.radial.diff(p, 1)
            ops[("T", l)] = self.radial.diff(p, 2)
            # P/r and T/r have the opposite parity
            ops[("P/r", l)] = self.radial.diff(-p, 1)
        return ops

    def refined(self, factor: float = 1.5) -> "SimilarityGrid":
        return SimilarityGrid(self.radial.refined(factor), int(round(self.lmax * factor)))

    def describe(self) -> dict:
        return {
            "kind": self.kind,
            "order": self.radial.order,
            "map_scale": self.radial.map_scale,
            "lmax": self.lmax,
            "n_theta": self.nt,
        }


class VectorField:
    """Poloidal/toroidal coefficients ``(2, lmax, nr)`` on a SimilarityGrid.

    Instances are treated as immutable values; arithmetic returns new fields.
    """

    __slots__ = ("grid", "coeffs")

    def __init__(self, grid: SimilarityGrid, coeffs=None):
        self.grid = grid
        if coeffs is None:
            coeffs = np.zeros((2, grid.lmax, grid.nr))
        coeffs = np.asarray(coeffs)
        if coeffs.shape != (2, grid.lmax, grid.nr):
            coeffs = coeffs.reshape(2, grid.lmax, grid.nr)
        if not np.all(np.isfinite(coeffs)):
            raise ValueError("field values must be finite")
        self.coeffs = coeffs

    representation = "stream_swirl"

    @property
    def P(self):
        return self.coeffs[0]

    @property
    def T(self):
        return self.coeffs[1]

    @property
    def flat(self) -> np.ndarray:
        return self.coeffs.reshape(-1)

    @classmethod
    def from_flat(cls, grid, vec):
        return cls(grid, np.asarray(vec).reshape(2, grid.lmax, grid.nr))

    def __add__(self, other):
        return VectorField(self.grid, self.coeffs + other.coeffs)

    def __sub__(self, other):
        return VectorField(self.grid, self.coeffs - other.coeffs)

    def __mul__(self, c):
        return VectorField(self.grid, self.coeffs * c)

    __rmul__ = __mul__

    def __neg__(self):
        return VectorField(self.grid, -self.coeffs)

    @property
    def real(self):
        return VectorField(self.grid, self.coeffs.real)

    def copy(self):
        return VectorField(self.grid, self.coeffs.copy())

    def components(self, derivatives: bool = False):
        return synthesize(self.grid, self.coeffs, derivatives)


def synthesize(grid: SimilarityGrid, coeffs, derivatives: bool = False):
    """Spherical components (u_r, u_th, u_ph) on the (r, mu) grid.

    With ``derivatives`` also returns their r- and theta-derivatives as
    arrays of shape (3, nr, nt).
    """
    coeffs = np.asarray(coeffs).reshape(2, grid.lmax, grid.nr)
    P, T = coeffs
    dP = np.zeros_like(P)
    d2P = np.zeros_like(P)
    dT = np.zeros_like(T)
    ops = grid.radial_ops
    for i, l in enumerate(grid.ls):
        d1, d2 = ops[("P", l)]
        dP[i] = d1 @ P[i]
        if derivatives:
            d2P[i] = d2 @ P[i]
            dT[i] = ops[("T", l)][0] @ T[i]
    return synthesize_profiles(grid, P, dP, d2P, T, dT, derivatives)


def synthesize_profiles(grid: SimilarityGrid, P, dP, d2P, T, dT, derivatives: bool = True):
    """Components from radial profiles P_l, P_l', P_l'', T_l, T_l' given on the nodes."""
    y, dy, d2y = grid.legendre_tables
    r = grid.radial.r
    ll = (grid.ls * (grid.ls + 1))[:, None]
    Pr = P / r
    a = ll * Pr  # u_r radial parts
    b = Pr + dP  # u_th radial parts
    c = -T  # u_ph radial parts
    u = np.stack([a.T @ y, b.T @ dy, c.T @ dy])
    if not derivatives:
        return u
    dPr = (dP - Pr) / r
    da = ll * dPr
    db = dPr + d2P
    dc = -dT
    ur = np.stack([da.T @ y, db.T @ dy, dc.T @ dy])
    ut = np.stack([a.T @ dy, b.T @ d2y, c.T @ d2y])
    return u, ur, ut


def advect(grid: SimilarityGrid, a, a_r, a_t, b, b_r, b_t):
    """(a . grad) b in spherical components for axisymmetric fields."""
    r = grid.radial.r[:, None]
    cot = grid.cot_theta[None, :]
    ar, at, ap = a
    br, bt, bp = b
    out_r = ar * b_r[0] + at / r * b_t[0] - (at * bt + ap * bp) / r
    out_t = ar * b_r[1] + at / r * b_t[1] + (at * br - ap * bp * cot) / r
    out_p = ar * b_r[2] + at / r * b_t[2] + (ap * br + ap * bt * cot) / r
    return np.stack([out_r, out_t, out_p])


def gradient_norm_sq(grid: SimilarityGrid, u, u_r, u_t):
    """Pointwise |grad u|^2 (Frobenius) for an axisymmetric field."""
    r = grid.radial.r[:, None]
    cot = grid.cot_theta[None, :]
    ur, ut, up = u
    rows = [
        u_r[0], u_r[1], u_r[2],
        (u_t[0] - ut) / r, (u_t[1] + ur) / r, u_t[2] / r,
        -up / r, -up * cot / r, (ur + ut * cot) / r,
    ]
    return sum(np.abs(x) ** 2 for x in rows)


class Projector:
    """Discrete Leray projection: L^2-orthogonal projection onto fields in P/T form."""

    def __init__(self, grid: SimilarityGrid):
        self.grid = grid
        r = grid.radial.r
        w = grid.radial.weights
        n0, n1 = grid.norms_l
        self._pinv = []
        for i, l in enumerate(grid.ls):
            d1 = grid.radial_ops[("P", l)][0]
            # P -> (A, B) with A = l(l+1) P / r, B = P / r + P'
            ma = np.diag(l * (l + 1) / r)
            mb = np.diag(1.0 / r) + d1
            sw_a = np.sqrt(w * n0[i])[:, None]
            sw_b = np.sqrt(w * n1[i])[:, None]
            stacked = np.vstack([sw_a * ma, sw_b * mb])
            scale = np.linalg.norm(stacked, axis=0)
            q, rr = np.linalg.qr(stacked / scale)
            pinv = np.linalg.solve(rr, q.T) / scale[:, None]
            self._pinv.append((pinv, sw_a, sw_b))

    def angular_coefficients(self, u):
        """Project components on the Legendre bases: returns A_l, B_l, C_l (lmax, nr)."""
        g = self.grid
        y, dy, _ = g.legendre_tables
        n0, n1 = g.norms_l
        wm = g.mu_weights
        A = (u[0] * wm) @ y.T / n0
        B = (u[1] * wm) @ dy.T / n1
        C = (u[2] * wm) @ dy.T / n1
        return A.T, B.T, C.T

    def __call__(self, u) -> VectorField:
        """Project physical components (3, nr, nt) to a divergence-free field."""
        g = self.grid
        A, B, C = self.angular_coefficients(u)
        coeffs = np.zeros((2, g.lmax, g.nr), dtype=np.result_type(u.dtype, float))
        for i in range(g.lmax):
            pinv, sw_a, sw_b = self._pinv[i]
            rhs = np.concatenate([sw_a[:, 0] * A[i], sw_b[:, 0] * B[i]])
            coeffs[0, i] = pinv @ rhs
            coeffs[1, i] = -C[i]
        return VectorField(g, coeffs)


_PROJECTORS: dict = {}


def projector(grid: SimilarityGrid) -> Projector:
    if grid not in _PROJECTORS:
        _PROJECTORS[grid] = Projector(grid)
    return _PROJECTORS[grid]


def divergence(grid: SimilarityGrid, u, u_r, u_t):
    r = grid.radial.r[:, None]
    cot = grid.cot_theta[None, :]
    return u_r[0] + 2 * u[0] / r + u_t[1] / r + u[1] * cot / r


def to_components_field(grid: SimilarityGrid, comps) -> "ComponentField":
    return ComponentField(grid, np.asarray(comps))


@dataclass(frozen=True)
class ComponentField:
    """A general (not necessarily solenoidal) axisymmetric field in components."""

    grid: SimilarityGrid
    values: np.ndarray  # (3, nr, nt)

    representation = "components"


class ScalarField:
    """Scalar f(r) Y_l on a RadialGrid.

    ``l = 0`` is a radial function in any dimension.  Nonzero degrees are
    supported in dimensions 1 (odd functions) and 3 (zonal harmonics).
    """

    __slots__ = ("grid", "values", "l")

    def __init__(self, grid: RadialGrid, values, l: int = 0):
        values = np.asarray(values)
        if values.shape != (grid.size,):
            raise ValueError(f"expected {grid.size} nodal values, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValueError("field values must be finite")
        if l and grid.dim not in (1, 3):
            raise GridError("angular degree > 0 needs dimension 1 or 3")
        if grid.dim == 1 and l > 1:
            raise GridError("dimension 1 only has degrees 0 and 1")
        self.grid = grid
        self.values = values
        self.l = int(l)

    representation = "components"

    @property
    def parity(self) -> int:
        return -1 if self.l % 2 else 1

    def __add__(self, other):
        return ScalarField(self.grid, self.values + other.values, self.l)

    def __sub__(self, other):
        return ScalarField(self.grid, self.values - other.values, self.l)

    def __mul__(self, c):
        return ScalarField(self.grid, self.values * c, self.l)

    __rmul__ = __mul__


def angular_lp_factor(dim: int, l: int, p: float) -> float:
    """int over S^(dim-1) of |Y_l|^p for the zonal harmonic Y_l(mu) = P_l(mu)."""
    if l == 0 or dim == 1:
        return 2 * np.pi ** (dim / 2) / gamma(dim / 2)
    mu, w = gauss_legendre(256)
    c = np.zeros(l + 1)
    c[l] = 1.0
    return 2 * np.pi * float(np.dot(w, np.abs(legendre.legval(mu, c)) ** p))
