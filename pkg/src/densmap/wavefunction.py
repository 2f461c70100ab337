"""One- and two-particle wavefunctions on a grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import grid as gc
from .errors import WaveFunctionError
from .grid import Grid

NONE = "none"
SYMMETRIC = "symmetric"
ANTISYMMETRIC = "antisymmetric"
_SYMMETRY_TAGS = (NONE, SYMMETRIC, ANTISYMMETRIC)


@dataclass(frozen=True)
class WaveFunction:
    """Complex amplitudes ``psi`` (shape ``(M,)`` or ``(M, M)``) on ``grid``.

    For rank 2 the first axis is the coordinate ``x`` of the tagged particle and
    the second axis is the integrated-out coordinate.
    """

    values: np.ndarray
    grid: Grid
    symmetry: str = NONE

    def __post_init__(self):
        v = np.array(self.values, dtype=complex)
        if v.ndim not in (1, 2):
            raise WaveFunctionError(f"rank must be 1 or 2, got array of ndim {v.ndim}")
        self.grid.check(v, v.ndim)
        if not np.all(np.isfinite(v)):
            raise WaveFunctionError("wavefunction contains non-finite entries")
        if self.symmetry not in _SYMMETRY_TAGS:
            raise WaveFunctionError(f"unknown symmetry tag {self.symmetry!r}")
        if v.ndim == 1 and self.symmetry != NONE:
            raise WaveFunctionError("symmetry tags only apply to rank-2 states")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def rank(self) -> int:
        return self.values.ndim

    @property
    def n_particles(self) -> int:
        return self.rank

    def norm(self) -> float:
        return gc.l2_norm(self.values, self.grid, self.rank)

    def inner(self, other: "WaveFunction") -> complex:
        return complex(gc.inner(self.values, other.values, self.grid, self.rank))

    def with_values(self, values) -> "WaveFunction":
        return WaveFunction(values, self.grid, self.symmetry)

    def symmetry_residual(self) -> float:
        """Largest entrywise violation of the declared exchange symmetry."""
        if self.rank == 1 or self.symmetry == NONE:
            return 0.0
        sign = 1.0 if self.symmetry == SYMMETRIC else -1.0
        return float(np.max(np.abs(self.values - sign * self.values.T)))


def normalize(psi: WaveFunction) -> WaveFunction:
    """Scale ``psi`` to unit discrete L2 norm without touching its phase."""
    nrm = psi.norm()
    if not nrm > 0:
        raise WaveFunctionError("cannot normalize a zero wavefunction")
    return psi.with_values(psi.values / nrm)


def sobolev_norm(psi: WaveFunction, order: int) -> float:
    """Discrete Sobolev norm ``(sum_{|a|<=k} ||D^a psi||^2)^(1/2)``.

    First derivatives are centered differences (symbol ``i sin(k dx)/dx`` on a
    plane wave) and second derivatives the three-point stencils.  For rank 2
    the mixed derivative is included at order 2.
    """
    if order not in (0, 1, 2):
        raise WaveFunctionError(f"Sobolev order must be 0, 1 or 2, got {order}")
    g, f, r = psi.grid, psi.values, psi.rank
    total = gc.l2_norm(f, g, r) ** 2
    if order >= 1:
        for ax in range(r):
            total += gc.l2_norm(gc.central_difference(f, g, axis=ax), g, r) ** 2
    if order >= 2:
        for ax in range(r):
            total += gc.l2_norm(gc.apply_laplacian(f, g, axis=ax), g, r) ** 2
        if r == 2:
            mixed = gc.central_difference(gc.central_difference(f, g, axis=0), g, axis=1)
            total += 2.0 * gc.l2_norm(mixed, g, 2) ** 2
    return float(np.sqrt(total))


def build_two_particle(phi_a: WaveFunction, phi_b: WaveFunction,
                       symmetry: str = NONE) -> WaveFunction:
    """Two-particle state from orbitals, (anti)symmetrized and normalized.

    ``psi(x1, x2) = phi_a(x1) phi_b(x2) +/- phi_a(x2) phi_b(x1)``; the plain
    product is returned (normalized) for ``symmetry='none'``.
    """
    if phi_a.rank != 1 or phi_b.rank != 1:
        raise WaveFunctionError("orbitals must be rank-1 wavefunctions")
    if phi_a.grid != phi_b.grid:
        raise WaveFunctionError("orbitals live on different grids")
    a, b = phi_a.values, phi_b.values
    prod = np.outer(a, b)
    if symmetry == NONE:
        psi = prod
    elif symmetry == SYMMETRIC:
        psi = prod + prod.T
    elif symmetry == ANTISYMMETRIC:
        psi = prod - prod.T
    else:
        raise WaveFunctionError(f"unknown symmetry tag {symmetry!r}")
    g = phi_a.grid
    nrm = gc.l2_norm(psi, g, 2)
    scale = max(gc.l2_norm(prod, g, 2), np.finfo(float).tiny)
    if nrm <= 1e-12 * scale:
        raise WaveFunctionError(
            "antisymmetrized product vanishes (identical orbitals violate Pauli exclusion)"
        )
    return WaveFunction(psi / nrm, g, symmetry)
