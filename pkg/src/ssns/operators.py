"""Transport terms K(a) phi = P(a.grad phi + phi.grad a) and the Navier-Stokes nonlinearity."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fields import SimilarityGrid, VectorField, advect, projector, synthesize


@dataclass(frozen=True)
class Background:
    """A coefficient field a given by its components and derivatives on a grid.

    Unlike VectorField it may lie outside the decaying P/T class, e.g. the
    heat flow of a homogeneous datum, which falls off only like 1/|y|.
    """

    grid: SimilarityGrid
    u: np.ndarray
    ur: np.ndarray
    ut: np.ndarray

    @classmethod
    def zero(cls, grid):
        z = np.zeros((3, grid.nr, grid.nt))
        return cls(grid, z, z, z)

    @classmethod
    def from_field(cls, field: VectorField):
        u, ur, ut = synthesize(field.grid, field.coeffs, True)
        return cls(field.grid, u, ur, ut)

    @classmethod
    def from_datum(cls, datum, grid: SimilarityGrid):
        """sigma e^Delta u0 of a homogeneous datum."""
        u, ur, ut = datum.heat_components(grid, True)
        return cls(grid, u, ur, ut)

    def __add__(self, other):
        return Background(self.grid, self.u + other.u, self.ur + other.ur, self.ut + other.ut)

    def __mul__(self, c):
        return Background(self.grid, c * self.u, c * self.ur, c * self.ut)

    __rmul__ = __mul__

    @property
    def is_zero(self) -> bool:
        return not (np.any(self.u) or np.any(self.ur) or np.any(self.ut))

    def sup_norm(self) -> float:
        return float(np.sqrt(np.sum(self.u**2, axis=0)).max())


def transport(bg: Background, phi: VectorField, project: bool = True):
    """a.grad phi + phi.grad a, projected unless ``project`` is False."""
    g = bg.grid
    u, ur, ut = synthesize(g, phi.coeffs, True)
    comps = advect(g, bg.u, bg.ur, bg.ut, u, ur, ut) + advect(g, u, ur, ut, bg.u, bg.ur, bg.ut)
    return projector(g)(comps) if project else comps


def nonlinear(phi: VectorField, project: bool = True):
    """phi.grad phi, Leray-projected."""
    g = phi.grid
    u, ur, ut = synthesize(g, phi.coeffs, True)
    comps = advect(g, u, ur, ut, u, ur, ut)
    return projector(g)(comps) if project else comps


def bilinear(a: VectorField, b: VectorField):
    """P(a.grad b)."""
    g = a.grid
    ua = synthesize(g, a.coeffs, True)
    ub = synthesize(g, b.coeffs, True)
    return projector(g)(advect(g, *ua, *ub))


class KOperator:
    """Matrix-free K(a) on VectorFields with an optional dense assembly."""

    def __init__(self, bg: Background):
        if not np.all(np.isfinite(bg.u)):
            raise ValueError("coefficient field a is not finite")
        self.bg = bg
        self.grid = bg.grid
        self._dense = None

    @property
    def size(self) -> int:
        return self.grid.n_dof

    def __call__(self, phi: VectorField) -> VectorField:
        if self.bg.is_zero:
            return VectorField(self.grid, np.zeros_like(phi.coeffs))
        if np.iscomplexobj(phi.coeffs):
            re = transport(self.bg, phi.real)
            im = transport(self.bg, VectorField(self.grid, phi.coeffs.imag))
            return VectorField(self.grid, re.coeffs + 1j * im.coeffs)
        return transport(self.bg, phi)

    def apply(self, vec) -> np.ndarray:
        if self._dense is not None:
            return self._dense @ vec
        return self(VectorField.from_flat(self.grid, vec)).flat

    def matrix(self) -> np.ndarray:
        """Dense matrix, assembled column by column (K is linear in phi)."""
        if self._dense is None:
            n = self.size
            mat = np.zeros((n, n))
            if not self.bg.is_zero:
                e = np.zeros(n)
                for j in range(n):
                    e[j] = 1.0
                    mat[:, j] = self(VectorField.from_flat(self.grid, e)).flat
                    e[j] = 0.0
            self._dense = mat
        return self._dense
