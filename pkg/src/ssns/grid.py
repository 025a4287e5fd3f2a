"""Mapped Chebyshev grids for decaying fields on R^n.

Radial functions are sampled on the positive half of a Chebyshev-Gauss-Lobatto
grid on (-1, 1) pushed to the real line by ``y = c x / (1 - x^2)``.  Functions
of definite parity in the signed radius are handled by folding the full
collocation operators onto the positive nodes, which keeps the origin out of
the node set and makes regularity at ``r = 0`` automatic.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np
from numpy.polynomial import legendre


class GridError(ValueError):
    pass


def cheb_nodes(m: int) -> np.ndarray:
    return np.cos(np.pi * np.arange(m + 1) / m)


def cheb_diff(m: int) -> np.ndarray:
    """Chebyshev-Gauss-Lobatto differentiation matrix (negative-sum trick)."""
    x = cheb_nodes(m)
    c = np.ones(m + 1)
    c[0] = c[-1] = 2.0
    c *= (-1.0) ** np.arange(m + 1)
    dx = x[:, None] - x[None, :]
    d = np.outer(c, 1.0 / c) / (dx + np.eye(m + 1))
    d -= np.diag(d.sum(axis=1))
    return d


def clenshaw_curtis_weights(m: int) -> np.ndarray:
    theta = np.pi * np.arange(m + 1) / m
    w = np.zeros(m + 1)
    v = np.ones(m - 1)
    interior = slice(1, m)
    if m % 2 == 0:
        w[0] = w[m] = 1.0 / (m**2 - 1)
        for k in range(1, m // 2):
            v -= 2.0 * np.cos(2 * k * theta[interior]) / (4 * k * k - 1)
        v -= np.cos(m * theta[interior]) / (m**2 - 1)
    else:
        w[0] = w[m] = 1.0 / m**2
        for k in range(1, (m - 1) // 2 + 1):
            v -= 2.0 * np.cos(2 * k * theta[interior]) / (4 * k * k - 1)
    w[interior] = 2.0 * v / m
    return w


@lru_cache(maxsize=16)
def _half_range_weights(m: int) -> np.ndarray:
    """w_k = int_0^1 l_k(x) dx for the Lagrange basis on the m + 1 CGL nodes."""
    x = cheb_nodes(m)
    vander = np.polynomial.chebyshev.chebvander(x, m)
    g, gw = np.polynomial.legendre.leggauss(m // 2 + 2)
    moments = 0.5 * gw @ np.polynomial.chebyshev.chebvander(0.5 * (g + 1), m)
    return np.linalg.solve(vander.T, moments)


@dataclass(frozen=True)
class RadialGrid:
    """Positive-radius nodes of an odd-order mapped CGL grid.

    ``order`` is the (odd) polynomial degree on (-1, 1); the grid carries
    ``(order - 1) // 2`` positive nodes, sorted by increasing radius.
    """

    order: int = 95
    map_scale: float = 8.0
    dim: int = 3

    def __post_init__(self):
        if self.order % 2 == 0:
            raise GridError("order must be odd so that r = 0 is not a node")
        if self.size < 8:
            raise GridError(f"need at least 8 radial nodes, got {self.size}")
        if not self.map_scale > 0:
            raise GridError("map_scale must be positive")
        if self.dim < 1:
            raise GridError("dimension must be >= 1")

    @property
    def size(self) -> int:
        return (self.order - 1) // 2

    @cached_property
    def _index(self) -> tuple[np.ndarray, np.ndarray]:
        # CGL index j has x_j decreasing; positive nodes are j = 1..h.
        h = self.size
        pos = np.arange(h, 0, -1)  # increasing radius
        return pos, self.order - pos

    @cached_property
    def x(self) -> np.ndarray:
        return cheb_nodes(self.order)[self._index[0]]

    @cached_property
    def r(self) -> np.ndarray:
        return self.to_radius(self.x)

    def to_radius(self, x):
        x = np.asarray(x, dtype=float)
        return self.map_scale * x / (1.0 - x * x)

    def from_radius(self, r):
        """Inverse map; the root of c x / (1 - x^2) = r lying in (-1, 1)."""
        r = np.asarray(r, dtype=float)
        c = self.map_scale
        with np.errstate(divide="ignore", invalid="ignore"):
            x = np.where(r == 0.0, 0.0, 2.0 * r / (c + np.sqrt(c * c + 4.0 * r * r)))
        return x

    @cached_property
    def dr_dx(self) -> np.ndarray:
        x = self.x
        return self.map_scale * (1 + x * x) / (1 - x * x) ** 2

    @cached_property
    def d2r_dx2(self) -> np.ndarray:
        x = self.x
        return self.map_scale * 2 * x * (x * x + 3) / (1 - x * x) ** 3

    @cached_property
    def weights(self) -> np.ndarray:
        """Weights for the radial measure r^(dim-1) dr on (0, inf)."""
        if self.dim % 2:
            w = clenshaw_curtis_weights(self.order)[self._index[0]]
        else:
            # r^(dim-1) dr/dx is odd in x: integrate the odd interpolant over (0, 1)
            h = _half_range_weights(self.order)
            pos, neg = self._index
            w = h[pos] - h[neg]
        return w * self.dr_dx * self.r ** (self.dim - 1)

    @cached_property
    def sphere_area(self) -> float:
        from math import gamma, pi

        return 2 * pi ** (self.dim / 2) / gamma(self.dim / 2)

    def integrate_radial(self, f) -> complex:
        """Integral over R^dim of a radial function sampled on the nodes."""
        return self.sphere_area * np.dot(self.weights, f)

    @cached_property
    def _dx_full(self) -> np.ndarray:
        return cheb_diff(self.order)

    def _fold(self, mat: np.ndarray, parity: int) -> np.ndarray:
        pos, neg = self._index
        return mat[np.ix_(pos, pos)] + parity * mat[np.ix_(pos, neg)]

    def diff_x(self, parity: int, zeros: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """First and second x-derivatives acting on folded nodal values.

        ``zeros`` is the order of the zero imposed at x = +-1 (1 for plain
        Dirichlet, 2 for functions of the form (1 - x^2) q with q(+-1) = 0).
        """
        return _diff_x_cached(self.order, parity, zeros)

    def diff(self, parity: int, zeros: int = 1) -> tuple[np.ndarray, np.ndarray]:
        """First and second radial derivatives on folded nodal values."""
        d1x, d2x = self.diff_x(parity, zeros)
        a = 1.0 / self.dr_dx
        d1 = a[:, None] * d1x
        d2 = (a * a)[:, None] * d2x - (self.d2r_dx2 * a**3)[:, None] * d1x
        return d1, d2

    def interpolation_matrix(self, r_new, parity: int) -> np.ndarray:
        """Barycentric interpolation of folded nodal values to radii r_new.

        Values beyond the last node follow the Dirichlet interpolant, which
        vanishes at infinity.
        """
        r_new = np.atleast_1d(np.asarray(r_new, dtype=float))
        m = self.order
        xf = cheb_nodes(m)
        bw = (-1.0) ** np.arange(m + 1)
        bw[0] *= 0.5
        bw[-1] *= 0.5
        xt = self.from_radius(np.abs(r_new))
        sgn = np.where(r_new < 0, parity, 1.0)
        diff = xt[:, None] - xf[None, :]
        exact = np.isclose(diff, 0.0, atol=1e-15, rtol=0)
        diff[exact] = 1.0
        k = bw[None, :] / diff
        k /= k.sum(axis=1, keepdims=True)
        rows, cols = np.nonzero(exact)
        k[rows] = 0.0
        k[rows, cols] = 1.0
        full = np.zeros((len(r_new), m + 1))
        full[:, :] = k
        pos, neg = self._index
        out = full[:, pos] + parity * full[:, neg]
        return sgn[:, None] * out

    def refined(self, factor: float = 1.5) -> "RadialGrid":
        n = int(round(self.order * factor))
        if n % 2 == 0:
            n += 1
        return RadialGrid(n, self.map_scale, self.dim)


_DIFF_CACHE: dict = {}


def _diff_x_cached(order: int, parity: int, zeros: int):
    key = (order, parity, zeros)
    if key in _DIFF_CACHE:
        return _DIFF_CACHE[key]
    if zeros not in (1, 2):
        raise GridError("zeros must be 1 or 2")
    d = cheb_diff(order)
    x = cheb_nodes(order)
    inner = slice(1, order)
    d1 = d[inner, inner]
    d2 = (d @ d)[inner, inner]
    xi = x[inner]
    if zeros == 2:
        g = 1.0 - xi * xi
        gi = 1.0 / g
        # f = g q  ->  f' = g' q + g q',  f'' = g'' q + 2 g' q' + g q''
        d1, d2 = (
            np.diag(-2 * xi * gi) + g[:, None] * d1 * gi[None, :],
            np.diag(-2 * gi) + (-4 * xi)[:, None] * d1 * gi[None, :] + g[:, None] * d2 * gi[None, :],
        )
    h = (order - 1) // 2
    pos = np.arange(h, 0, -1) - 1
    neg = order - np.arange(h, 0, -1) - 1
    fold = lambda m: m[np.ix_(pos, pos)] + parity * m[np.ix_(pos, neg)]
    out = (fold(d1), fold(d2))
    _DIFF_CACHE[key] = out
    return out


def gauss_legendre(n: int) -> tuple[np.ndarray, np.ndarray]:
    mu, w = legendre.leggauss(n)
    return mu, w
