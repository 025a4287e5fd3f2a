"""(-1)-homogeneous axisymmetric initial data and their exact heat flow.

A datum u0 = sigma g(theta) / |x| is stored through constant poloidal and
toroidal amplitudes,

    P = sum p_l P_l(cos th),   T = sum t_l P_l(cos th) / |x|,

so that u0 = curl curl(P x) + curl(T x).  Each channel is a harmonic
polynomial times a power of |x|, and the heat flow of such a product is
the harmonic polynomial times a radial heat flow in dimension 3 + 2l,
which has a closed form in terms of Kummer's function M(a, b, z).
"""
from __future__ import annotations

from dataclasses import dataclass
from math import gamma

import numpy as np
from numpy.polynomial import legendre
from scipy.special import hyp1f1

from .fields import SimilarityGrid, synthesize_profiles
from .grid import gauss_legendre


class DatumError(ValueError):
    pass


def radial_heat_power(a: float, d: float, r, derivatives: int = 2):
    """(e^Delta |x|^-a)(r) in R^d with its first two r-derivatives."""
    r = np.asarray(r, dtype=float)
    alpha, b = a / 2, d / 2
    c = 2.0**-a * gamma((d - a) / 2) / gamma(d / 2)
    z = -r * r / 4
    m0 = hyp1f1(alpha, b, z)
    m1 = hyp1f1(alpha + 1, b + 1, z)
    m2 = hyp1f1(alpha + 2, b + 2, z)
    k1 = alpha / b
    k2 = k1 * (alpha + 1) / (b + 1)
    f = c * m0
    f1 = -c * k1 * m1 * r / 2
    f2 = c * (k2 * m2 * r * r / 4 - k1 * m1 / 2)
    return f, f1, f2


def harmonic_heat_profile(l: int, a: float, r):
    """g(r) = r^l F(r) with F the heat flow of |x|^-a in dimension 3 + 2l; returns g, g', g''."""
    f, f1, f2 = radial_heat_power(a, 3 + 2 * l, r)
    rl = r**l
    rl1 = l * r ** (l - 1) if l >= 1 else 0.0 * r
    rl2 = l * (l - 1) * r ** (l - 2) if l >= 2 else 0.0 * r
    g = rl * f
    g1 = rl1 * f + rl * f1
    g2 = rl2 * f + 2 * rl1 * f1 + rl * f2
    return g, g1, g2


def _legendre_row(l, mu):
    c = np.zeros(l + 1)
    c[l] = 1.0
    return legendre.legval(mu, c), legendre.legval(mu, legendre.legder(c))


@dataclass(frozen=True)
class InitialDatum:
    """u0(x) = sigma g(x / |x|) / |x| in poloidal/toroidal amplitudes."""

    p: tuple = ()
    t: tuple = ()
    sigma: float = 1.0
    label: str = "custom"

    @property
    def lmax(self) -> int:
        return max(len(self.p), len(self.t), 1)

    def amplitudes(self, lmax: int | None = None):
        lmax = lmax or self.lmax
        p = np.zeros(lmax)
        t = np.zeros(lmax)
        p[: len(self.p)] = self.p[:lmax]
        t[: len(self.t)] = self.t[:lmax]
        return p, t

    def with_sigma(self, sigma: float) -> "InitialDatum":
        return InitialDatum(self.p, self.t, float(sigma), self.label)

    def sphere_values(self, theta):
        """g(theta) = (g_r, g_th, g_ph) for unit sigma."""
        mu = np.cos(np.asarray(theta, dtype=float))
        s = np.sin(np.asarray(theta, dtype=float))
        out = np.zeros((3,) + mu.shape)
        p, t = self.amplitudes()
        for i in range(self.lmax):
            l = i + 1
            y, dp = _legendre_row(l, mu)
            dy = -s * dp
            out[0] += l * (l + 1) * p[i] * y
            out[1] += p[i] * dy
            out[2] -= t[i] * dy
        return out

    def __call__(self, r, theta):
        """Spherical components of sigma g(theta) / r."""
        r = np.asarray(r, dtype=float)
        return self.sigma * self.sphere_values(theta) / r

    def on_grid(self, grid: SimilarityGrid):
        """u0 sampled on the (r, mu) nodes, shape (3, nr, nt)."""
        g = self.sphere_values(np.arccos(grid.mu))
        return self.sigma * g[:, None, :] / grid.radial.r[None, :, None]

    def channel_profiles(self, r, lmax: int):
        """P_l, P_l', P_l'', T_l, T_l' of sigma e^Delta u0 at radii r, each (lmax, len(r))."""
        r = np.asarray(r, dtype=float)
        p, t = self.amplitudes(lmax)
        out = np.zeros((5, lmax, r.size))
        for i in range(lmax):
            l = i + 1
            if p[i]:
                g, g1, g2 = harmonic_heat_profile(l, l, r)
                out[0, i], out[1, i], out[2, i] = p[i] * g, p[i] * g1, p[i] * g2
            if t[i]:
                g, g1, _ = harmonic_heat_profile(l, l + 1, r)
                out[3, i], out[4, i] = t[i] * g, t[i] * g1
        return self.sigma * out

    def heat_components(self, grid: SimilarityGrid, derivatives: bool = True):
        """Components of sigma e^Delta u0 (and derivatives) on a SimilarityGrid."""
        P, dP, d2P, T, dT = self.channel_profiles(grid.radial.r, grid.lmax)
        return synthesize_profiles(grid, P, dP, d2P, T, dT, derivatives)


def swirl_datum(sigma: float = 1.0) -> InitialDatum:
    """Pure swirl u_phi = sigma sin(theta) / |x| (the default family)."""
    return InitialDatum(p=(), t=(1.0,), sigma=float(sigma), label="swirl")


def homogeneous_datum(sphere_profile, sigma: float, lmax: int = 8, tol: float = 1e-8) -> InitialDatum:
    """Build u0 = sigma g(x/|x|)/|x| from callables g = (g_r, g_th, g_ph) of theta.

    The profile is expanded in Legendre modes; it is rejected if the
    induced field is not solenoidal (g_r must have no l = 0 part and g_th
    must be the poloidal partner of g_r) or if lmax modes do not capture it.
    """
    if sigma < 0:
        raise DatumError("amplitude sigma must be >= 0")
    if sphere_profile is None:
        return InitialDatum((), (), float(sigma), "zero")
    g_r, g_t, g_p = sphere_profile
    n = 4 * lmax + 8
    mu, w = gauss_legendre(n)
    th = np.arccos(mu)
    s = np.sin(th)
    vals = [np.broadcast_to(np.asarray(f(th), dtype=float), th.shape) for f in (g_r, g_t, g_p)]
    scale = max(1.0, max(np.abs(v).max() for v in vals))
    mean_r = 0.5 * np.dot(w, vals[0])
    if abs(mean_r) > tol * scale:
        raise DatumError(f"radial profile has a monopole part {mean_r:.3e}; u0 is not solenoidal")
    p = np.zeros(lmax)
    t = np.zeros(lmax)
    for i in range(lmax):
        l = i + 1
        y, dp = _legendre_row(l, mu)
        dy = -s * dp
        nrm = 2.0 / (2 * l + 1)
        p[i] = np.dot(w, vals[0] * y) / nrm / (l * (l + 1))
        t[i] = -np.dot(w, vals[2] * dy) / (l * (l + 1) * nrm)
    datum = InitialDatum(tuple(p), tuple(t), float(sigma), "profile")
    recon = datum.sphere_values(th)
    err = max(np.abs(recon[k] - vals[k]).max() for k in range(3))
    if err > tol * scale:
        raise DatumError(f"profile is not a solenoidal degree <= {lmax} field (mismatch {err:.3e})")
    return datum
