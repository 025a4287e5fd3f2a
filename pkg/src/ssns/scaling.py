"""Maps between physical variables (x, t) and similarity variables (y, s).

With y = x / sqrt(t) a field is rescaled by moving the grid rather than by
interpolating: the physical grid is the similarity grid stretched by
sqrt(t), so both sides are sampled at corresponding nodes and the L^p
scaling law holds to round-off.
"""
from __future__ import annotations

import numpy as np

from .fields import ScalarField, SimilarityGrid, VectorField
from .grid import RadialGrid


def _scaled_radial(grid: RadialGrid, factor: float) -> RadialGrid:
    return RadialGrid(grid.order, grid.map_scale * factor, grid.dim)


def _check_time(t):
    if not t > 0:
        raise ValueError(f"time must be positive, got {t}")


def from_similarity(phi, t: float, alpha: float = 1.0):
    """u(x, t) = t^(-alpha/2) phi(x / sqrt(t)).

    Vector fields always use alpha = 1 (the Navier-Stokes scaling).
    """
    _check_time(t)
    rt = np.sqrt(t)
    if isinstance(phi, VectorField):
        g = phi.grid
        pg = SimilarityGrid(_scaled_radial(g.radial, rt), g.lmax, g.n_theta)
        coeffs = phi.coeffs.copy()
        coeffs[1] = coeffs[1] / rt
        return VectorField(pg, coeffs)
    g = _scaled_radial(phi.grid, rt)
    return ScalarField(g, phi.values * t ** (-alpha / 2), phi.l)


def to_similarity(u, t: float, alpha: float = 1.0):
    """phi(y) = t^(alpha/2) u(sqrt(t) y, t); inverse of from_similarity."""
    _check_time(t)
    rt = np.sqrt(t)
    if isinstance(u, VectorField):
        g = u.grid
        sg = SimilarityGrid(_scaled_radial(g.radial, 1 / rt), g.lmax, g.n_theta)
        coeffs = u.coeffs.copy()
        coeffs[1] = coeffs[1] * rt
        return VectorField(sg, coeffs)
    g = _scaled_radial(u.grid, 1 / rt)
    return ScalarField(g, u.values * t ** (alpha / 2), u.l)


def scaling_exponent(n: int, p: float, alpha: float) -> float:
    """Exponent e in ||t^(-alpha/2) phi(./sqrt t)||_p = t^e ||phi||_p."""
    return n / (2 * p) - alpha / 2


def resample(field, grid):
    """Interpolate a field onto another grid of the same kind."""
    if isinstance(field, VectorField):
        src = field.grid.radial
        out = np.zeros((2, grid.lmax, grid.nr), dtype=field.coeffs.dtype)
        m = min(grid.lmax, field.grid.lmax)
        for i in range(m):
            par = field.grid.parity(i + 1)
            mat = src.interpolation_matrix(grid.radial.r, par)
            out[:, i] = field.coeffs[:, i] @ mat.T
        return VectorField(grid, out)
    mat = field.grid.interpolation_matrix(grid.r, field.parity)
    return ScalarField(grid, mat @ field.values, field.l)
