"""L^p, X = L^2 cap L^4, weighted-sup (Y) and Z_T norms on mapped grids."""
from __future__ import annotations

from functools import lru_cache

import numpy as np

from .fields import (
    ScalarField,
    SimilarityGrid,
    VectorField,
    angular_lp_factor,
    gradient_norm_sq,
    synthesize,
)


def _check_finite(values):
    if not np.all(np.isfinite(values)):
        raise ValueError("non-finite values in field")


def _fine_grid(grid: SimilarityGrid) -> SimilarityGrid:
    # |u|^4 is a polynomial of degree 4 lmax in cos(theta)
    nt = max(grid.nt, 2 * grid.lmax + 2)
    if nt == grid.nt:
        return grid
    return SimilarityGrid(grid.radial, grid.lmax, nt)


def vector_pointwise(field: VectorField, gradient: bool = False):
    """|u|^2 (or |grad u|^2) on the fine angular quadrature, with its weights."""
    fine = _fine_grid(field.grid)
    if gradient:
        u, ur, ut = synthesize(fine, field.coeffs, True)
        val = gradient_norm_sq(fine, u, ur, ut)
    else:
        u = synthesize(fine, field.coeffs)
        val = np.sum(np.abs(u) ** 2, axis=0)
    return val, fine.volume_weights


def lp_norm(field, p: float = 2.0) -> float:
    if isinstance(field, VectorField):
        _check_finite(field.coeffs)
        sq, w = vector_pointwise(field)
        return float(np.sum(w * sq ** (p / 2)) ** (1 / p))
    _check_finite(field.values)
    g = field.grid
    ang = angular_lp_factor(g.dim, field.l, p)
    return float((ang * np.dot(g.weights, np.abs(field.values) ** p)) ** (1 / p))


def grad_lp_norm(field, p: float = 2.0) -> float:
    if isinstance(field, VectorField):
        sq, w = vector_pointwise(field, gradient=True)
        return float(np.sum(w * sq ** (p / 2)) ** (1 / p))
    if field.l != 0:
        raise NotImplementedError("gradient norms of scalars need l = 0")
    g = field.grid
    d1, _ = g.diff(field.parity, 1)
    return lp_norm(ScalarField(g, d1 @ field.values), p)


def x_norm(field) -> float:
    """||f||_{L^2} + ||f||_{L^4}."""
    return lp_norm(field, 2) + lp_norm(field, 4)


def grad_x_norm(field) -> float:
    return grad_lp_norm(field, 2) + grad_lp_norm(field, 4)


def y_norm(field: VectorField) -> float:
    """max over |alpha| <= 2 of sup (1 + |y|)^(1 + |alpha|) |d^alpha u|.

    First derivatives are exact; the second-order term uses the radial
    derivative of |grad u| on the nodes, which is equivalent up to
    lower-order terms already counted.
    """
    _check_finite(field.coeffs)
    g = field.grid
    u, ur, ut = synthesize(g, field.coeffs, True)
    r = g.radial.r[:, None]
    mag0 = np.sqrt(np.sum(np.abs(u) ** 2, axis=0))
    mag1 = np.sqrt(gradient_norm_sq(g, u, ur, ut))
    mag2 = np.abs(np.gradient(mag1, g.radial.r, axis=0))
    terms = [(1 + r) * mag0, (1 + r) ** 2 * mag1, (1 + r) ** 3 * mag2]
    return float(max(t.max() for t in terms))


def zT_seminorm(times, l4_values, grad_l4_values) -> float:
    """sup_t ( ||u||_{L^4} + t^{1/2} ||grad u||_{L^4} ) over sampled times."""
    t = np.asarray(times, dtype=float)
    a = np.asarray(l4_values, dtype=float)
    b = np.asarray(grad_l4_values, dtype=float)
    if np.any(t <= 0):
        raise ValueError("Z_T samples need t > 0")
    return float(np.max(a + np.sqrt(t) * b))


def inner(a: VectorField, b: VectorField) -> complex:
    """Discrete L^2 pairing <a, b> (conjugate-linear in a)."""
    fine = _fine_grid(a.grid)
    ua = synthesize(fine, a.coeffs)
    ub = synthesize(fine, b.coeffs)
    return np.sum(fine.volume_weights * np.sum(np.conj(ua) * ub, axis=0))


@lru_cache(maxsize=8)
def l2_factor(grid) -> np.ndarray:
    """Upper-triangular R with |R c| equal to the L^2 norm of the field with flat coefficients c."""
    fine = _fine_grid(grid)
    w = np.sqrt(fine.volume_weights).ravel()
    n = grid.n_dof
    cols = np.zeros((3 * w.size, n))
    e = np.zeros(n)
    for j in range(n):
        e[j] = 1.0
        u = synthesize(fine, VectorField.from_flat(grid, e).coeffs)
        cols[:, j] = (u.reshape(3, -1) * w).ravel()
        e[j] = 0.0
    return np.linalg.qr(cols, mode="r")
