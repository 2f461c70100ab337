"""Uniform 1D grids, finite-difference stencils and quadrature.

Periodic grids hold ``M`` nodes ``x_m = m*dx`` with ``dx = L/M``; Dirichlet
grids hold the ``M`` interior nodes ``x_m = (m+1)*dx`` with ``dx = L/(M+1)``
and the boundary values are implicitly zero.  Every operator here acts on the
last ``rank`` axes of an array, so two-particle fields of shape ``(M, M)`` are
handled by the same code through the ``axis`` argument.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .errors import GridError

PERIODIC = "periodic"
DIRICHLET = "dirichlet"

MIN_POINTS = 8


@dataclass(frozen=True)
class Grid:
    L: float
    M: int
    boundary: str = PERIODIC
    origin: float = 0.0
    x: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if not np.isfinite(self.L) or self.L <= 0:
            raise GridError(f"grid length must be positive, got {self.L}")
        if int(self.M) != self.M or self.M < MIN_POINTS:
            raise GridError(f"grid needs at least {MIN_POINTS} points, got {self.M}")
        if self.boundary not in (PERIODIC, DIRICHLET):
            raise GridError(f"unknown boundary {self.boundary!r}")
        object.__setattr__(self, "M", int(self.M))
        m = np.arange(self.M)
        if self.periodic:
            x = self.origin + m * self.dx
        else:
            x = self.origin + (m + 1) * self.dx
        x.setflags(write=False)
        object.__setattr__(self, "x", x)

    @property
    def periodic(self) -> bool:
        return self.boundary == PERIODIC

    @property
    def dx(self) -> float:
        return self.L / self.M if self.periodic else self.L / (self.M + 1)

    @property
    def x_half(self) -> np.ndarray:
        """Staggered points carrying currents and half-grid weights."""
        if self.periodic:
            return self.x + 0.5 * self.dx
        return self.origin + (np.arange(self.M + 1) + 0.5) * self.dx

    @property
    def n_half(self) -> int:
        return self.M if self.periodic else self.M + 1

    def check(self, f, rank: int = 1) -> np.ndarray:
        """Return ``f`` as an array after verifying its trailing shape."""
        f = np.asarray(f)
        if f.shape[f.ndim - rank:] != (self.M,) * rank or f.ndim < rank:
            raise GridError(
                f"field of shape {f.shape} does not live on a grid with M={self.M}"
                f" (rank {rank})"
            )
        return f


def build_grid(L: float, M: int, boundary: str = PERIODIC, origin: float = 0.0) -> Grid:
    """Construct a uniform grid (see :class:`Grid` for node placement)."""
    return Grid(float(L), M, boundary.lower(), float(origin))


def _shift(f: np.ndarray, step: int, axis: int, periodic: bool) -> np.ndarray:
    """Return g with g[m] = f[m + step] along ``axis``; zero outside for Dirichlet."""
    if periodic:
        return np.roll(f, -step, axis=axis)
    out = np.zeros_like(f)
    n = f.shape[axis]
    src = [slice(None)] * f.ndim
    dst = [slice(None)] * f.ndim
    if step > 0:
        src[axis] = slice(step, n)
        dst[axis] = slice(0, n - step)
    else:
        src[axis] = slice(0, n + step)
        dst[axis] = slice(-step, n)
    out[tuple(dst)] = f[tuple(src)]
    return out


def apply_laplacian(f, grid: Grid, axis: int = -1) -> np.ndarray:
    """Bare second difference ``(f[m+1] - 2 f[m] + f[m-1]) / dx**2`` along ``axis``."""
    f = np.asarray(f)
    if f.shape[axis] != grid.M:
        raise GridError(f"axis {axis} has length {f.shape[axis]}, grid has M={grid.M}")
    p = grid.periodic
    return (_shift(f, 1, axis, p) - 2.0 * f + _shift(f, -1, axis, p)) / grid.dx**2


def laplacian_all(f, grid: Grid, rank: int) -> np.ndarray:
    """Full Laplacian over all ``rank`` particle coordinates."""
    f = grid.check(f, rank)
    return sum(apply_laplacian(f, grid, axis=-1 - k) for k in range(rank))


def forward_difference(f, grid: Grid, axis: int = -1) -> np.ndarray:
    """Staggered difference ``(f[m+1] - f[m]) / dx`` at the half-grid points.

    Periodic grids return ``M`` values (the last one wraps around); Dirichlet
    grids return ``M + 1`` values including both boundary half-points.
    """
    f = np.asarray(f)
    if grid.periodic:
        return (np.roll(f, -1, axis=axis) - f) / grid.dx
    f = np.moveaxis(f, axis, -1)
    pad = [(0, 0)] * (f.ndim - 1) + [(1, 1)]
    fp = np.pad(f, pad)
    return np.moveaxis(np.diff(fp, axis=-1) / grid.dx, -1, axis)


def backward_divergence(h, grid: Grid, axis: int = -1) -> np.ndarray:
    """Divergence of a half-grid field back onto the nodes: ``(h[m+1/2] - h[m-1/2]) / dx``."""
    h = np.asarray(h)
    if h.shape[axis] != grid.n_half:
        raise GridError(f"half-grid field needs {grid.n_half} entries along axis {axis}")
    if grid.periodic:
        return (h - np.roll(h, 1, axis=axis)) / grid.dx
    return np.diff(h, axis=axis) / grid.dx


def central_difference(f, grid: Grid, axis: int = -1) -> np.ndarray:
    """Centered first derivative ``(f[m+1] - f[m-1]) / (2 dx)``."""
    f = np.asarray(f)
    p = grid.periodic
    return (_shift(f, 1, axis, p) - _shift(f, -1, axis, p)) / (2.0 * grid.dx)


def half_to_nodes(h, grid: Grid, axis: int = -1) -> np.ndarray:
    """Average a half-grid field onto the nodes."""
    h = np.asarray(h)
    if grid.periodic:
        return 0.5 * (h + np.roll(h, 1, axis=axis))
    lo = np.take(h, np.arange(grid.M), axis=axis)
    hi = np.take(h, np.arange(1, grid.M + 1), axis=axis)
    return 0.5 * (lo + hi)


def integrate(f, grid: Grid, rank: int | None = None) -> float | complex:
    """Rectangle-rule quadrature ``sum(f) * dx**rank`` over the trailing axes.

    For periodic grids this is exact for trigonometric polynomials below the
    Nyquist mode.  On Dirichlet grids it is the trapezoidal rule with zero
    boundary values.
    """
    f = np.asarray(f)
    if rank is None:
        rank = f.ndim
    f = grid.check(f, rank)
    axes = tuple(range(f.ndim - rank, f.ndim))
    return np.sum(f, axis=axes) * grid.dx**rank


def inner(f, g, grid: Grid, rank: int | None = None):
    """Discrete L2 inner product, antilinear in the first argument."""
    return integrate(np.conj(f) * g, grid, rank)


def l2_norm(f, grid: Grid, rank: int | None = None):
    """Discrete L2 norm over the trailing ``rank`` axes (an array for stacked fields)."""
    out = np.sqrt(np.real(integrate(np.abs(np.asarray(f)) ** 2, grid, rank)))
    return float(out) if np.ndim(out) == 0 else out


def laplacian_matrix(grid: Grid) -> sp.csr_matrix:
    """Sparse matrix of :func:`apply_laplacian` for one coordinate."""
    M, h2 = grid.M, grid.dx**2
    main = -2.0 * np.ones(M)
    off = np.ones(M - 1)
    A = sp.diags([off, main, off], [-1, 0, 1], format="lil")
    if grid.periodic:
        A[0, M - 1] = 1.0
        A[M - 1, 0] = 1.0
    return (A / h2).tocsr()


def difference_matrix(grid: Grid) -> sp.csr_matrix:
    """Sparse matrix of :func:`forward_difference` (shape ``n_half x M``)."""
    M = grid.M
    if grid.periodic:
        D = sp.diags([-np.ones(M), np.ones(M - 1)], [0, 1], shape=(M, M), format="lil")
        D[M - 1, 0] = 1.0
    else:
        D = sp.diags([-np.ones(M), np.ones(M)], [-1, 0], shape=(M + 1, M), format="lil")
    return (D / grid.dx).tocsr()
