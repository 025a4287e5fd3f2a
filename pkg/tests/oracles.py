"""Independent symbolic oracles (sympy), kept apart from the numerical code."""
from __future__ import annotations

from functools import lru_cache

import sympy as sp


def drift_laplacian_cartesian(f, ys):
    """Delta f + (y/2).grad f in Cartesian coordinates."""
    return sum(sp.diff(f, y, 2) + y / 2 * sp.diff(f, y) for y in ys)


@lru_cache(maxsize=None)
def gaussian_derivative_eigenvalue(n: int, multi_index: tuple) -> sp.Rational:
    """Apply the drift Laplacian to d^beta exp(-|y|^2/4) and return the (constant) ratio."""
    ys = sp.symbols(f"y1:{n + 1}", real=True)
    g = sp.exp(-sum(y**2 for y in ys) / 4)
    f = g
    for y, k in zip(ys, multi_index):
        f = sp.diff(f, y, k)
    ratio = sp.simplify(drift_laplacian_cartesian(f, ys) / f)
    if ratio.free_symbols:
        raise AssertionError(f"d^{multi_index} G is not an eigenfunction: ratio {ratio}")
    return sp.Rational(ratio)


def hermite_spectrum(n: int, kmax: int = 6) -> list:
    """Distinct eigenvalues found on Gaussian derivatives of total order 0..kmax (one direction suffices)."""
    vals = []
    for k in range(kmax + 1):
        idx = (k,) + (0,) * (n - 1)
        vals.append(gaussian_derivative_eigenvalue(n, idx))
    return vals


@lru_cache(maxsize=None)
def channel_eigenvalue(n: int, l: int, j: int) -> sp.Rational:
    """Radial channel l of the drift Laplacian applied to r^l L_j^(l+n/2-1)(r^2/4) e^{-r^2/4}."""
    r = sp.symbols("r", positive=True)
    f = r**l * sp.assoc_laguerre(j, l + sp.Rational(n, 2) - 1, r**2 / 4) * sp.exp(-r**2 / 4)
    op = sp.diff(f, r, 2) + (n - 1) / r * sp.diff(f, r) - l * (l + n - 2) / r**2 * f + r / 2 * sp.diff(f, r)
    ratio = sp.simplify(op / f)
    if ratio.free_symbols:
        raise AssertionError(f"channel ({l}, {j}) candidate is not an eigenfunction: {ratio}")
    return sp.Rational(ratio)


def heat_gaussian(n: int, w, t):
    """e^{t Delta} exp(-r^2/4w) in R^n, closed form."""
    r = sp.symbols("r", positive=True)
    return (w / (w + t)) ** sp.Rational(n, 2) * sp.exp(-r**2 / (4 * (w + t))), r


def swirl_gaussian_lp(p: int):
    """||u||_p for u = r exp(-r^2/4) sin(theta) e_phi in R^3 (exact)."""
    r, th = sp.symbols("r theta", positive=True)
    radial = sp.integrate(r**p * sp.exp(-p * r**2 / 4) * r**2, (r, 0, sp.oo))
    angular = sp.integrate(sp.sin(th) ** (p + 1), (th, 0, sp.pi))
    return float((2 * sp.pi * radial * angular) ** sp.Rational(1, p))
