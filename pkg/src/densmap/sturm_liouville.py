"""Weighted divergence-form solver for ``-div(n grad v) = zeta`` on 1D grids.

The operator is assembled as ``A = D^T diag(n_half) D`` with ``D`` the
staggered forward difference, so it is symmetric positive semidefinite and
mirrors the weak form ``Q(u, v) = <grad u, n grad v>``.  Periodic problems
have the constants as kernel and are gauge fixed to zero mean; Dirichlet
problems take ``v = 0`` outside the interior nodes.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import grid as gc
from .errors import DegenerateWeight, IncompatibleRHS
from .grid import Grid

N_MIN = 1e-12
ARITHMETIC = "arithmetic"
GEOMETRIC = "geometric"


def half_weights(n, grid: Grid, averaging: str = ARITHMETIC) -> np.ndarray:
    """Weight at the half-grid points from node values.

    ``arithmetic`` gives ``(n[m] + n[m+1]) / 2``; ``geometric`` gives
    ``sqrt(n[m] n[m+1])``, which equals ``Re(conj(psi[m]) psi[m+1])`` for a
    real positive state and therefore makes the discrete force law exact.
    On Dirichlet grids the two boundary half-points carry the adjacent node
    value, so that a constant weight reproduces the plain Laplacian.
    """
    n = np.asarray(grid.check(n), dtype=float)
    nxt = np.roll(n, -1) if grid.periodic else n[1:]
    cur = n if grid.periodic else n[:-1]
    if averaging == ARITHMETIC:
        inner = 0.5 * (cur + nxt)
    elif averaging == GEOMETRIC:
        inner = np.sqrt(np.clip(cur, 0.0, None) * np.clip(nxt, 0.0, None))
    else:
        raise ValueError(f"unknown averaging {averaging!r}")
    if grid.periodic:
        return inner
    return np.concatenate([[n[0]], inner, [n[-1]]])


@dataclass(frozen=True, eq=False)
class SLProblem:
    """Problem data; ``half_weight`` overrides the averaged node weight when given."""

    weight: np.ndarray
    zeta: np.ndarray
    grid: Grid
    averaging: str = ARITHMETIC
    half_weight: np.ndarray | None = None

    def __post_init__(self):
        w = np.array(self.grid.check(self.weight), dtype=float)
        z = np.array(self.grid.check(self.zeta), dtype=float)
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(z))):
            raise ValueError("weight and inhomogeneity must be finite")
        object.__setattr__(self, "weight", w)
        object.__setattr__(self, "zeta", z)
        if self.half_weight is not None:
            h = np.array(self.half_weight, dtype=float)
            if h.shape != (self.grid.n_half,):
                raise ValueError(f"half weight needs {self.grid.n_half} entries, got {h.shape}")
            object.__setattr__(self, "half_weight", h)

    @cached_property
    def n_half(self) -> np.ndarray:
        if self.half_weight is not None:
            return self.half_weight
        return half_weights(self.weight, self.grid, self.averaging)

    @cached_property
    def operator(self) -> sp.csr_matrix:
        D = gc.difference_matrix(self.grid)
        return (D.T @ sp.diags(self.n_half) @ D).tocsr()

    def apply(self, v) -> np.ndarray:
        """``-div(n_half grad v)`` without building the matrix."""
        g = self.grid
        return -gc.backward_divergence(self.n_half * gc.forward_difference(v, g), g)

    def quadratic_form(self, u, v) -> float:
        """Discrete ``Q(u, v) = sum n_half Du Dv dx``."""
        g = self.grid
        # the gradient product is formed first so that Q(u, v) == Q(v, u) bitwise
        grads = gc.forward_difference(u, g) * gc.forward_difference(v, g)
        return float(np.sum(self.n_half * grads) * g.dx)

    def with_zeta(self, zeta) -> "SLProblem":
        return SLProblem(self.weight, zeta, self.grid, self.averaging, self.half_weight)

    @property
    def kernel_dim(self) -> int:
        return 1 if self.grid.periodic else 0


def _check_weight(p: SLProblem, n_min: float = N_MIN):
    bad = np.flatnonzero(p.n_half <= n_min)
    if bad.size:
        raise DegenerateWeight(
            f"half-grid weight <= {n_min:g} at {bad.size} point(s), first at index {bad[0]}"
        )


def _compatible_zeta(p: SLProblem) -> np.ndarray:
    z = p.zeta
    if not p.grid.periodic:
        return z
    total = gc.integrate(z, p.grid)
    scale = gc.l2_norm(z, p.grid)
    if abs(total) > 1e-8 * scale:
        raise IncompatibleRHS(
            f"periodic right-hand side integrates to {total:.3e} (norm {scale:.3e})"
        )
    return z - total / p.grid.L


def _integrate_once(n_half: np.ndarray, zeta: np.ndarray, grid: Grid) -> np.ndarray:
    dx = grid.dx
    if grid.periodic:
        # flux F[m+1/2] = C - sum_{j<=m} zeta_j dx; C chosen so that sum(F/n) = 0
        P = np.cumsum(zeta) * dx
        inv = 1.0 / n_half
        C = np.sum(P * inv) / np.sum(inv)
        grad = (C - P) * inv
        v = np.concatenate([[0.0], np.cumsum(grad[:-1]) * dx])
        return v - v.mean()
    # half points j = 0..M, F_j = F_0 - sum_{i<j} zeta_i dx; v_{-1} = v_M = 0
    P = np.concatenate([[0.0], np.cumsum(zeta) * dx])
    inv = 1.0 / n_half
    F0 = np.sum(P * inv) / np.sum(inv)
    grad = (F0 - P) * inv
    return np.cumsum(grad[:-1]) * dx


def solve_direct_1d(p: SLProblem, n_min: float = N_MIN, refine: int = 2) -> np.ndarray:
    """Solve ``A v = zeta`` by direct integration of the flux.

    The flux ``n grad v`` is the running integral of ``-zeta``; dividing by
    the weight and integrating once more gives ``v``.  A couple of
    residual-correction sweeps polish the result to round-off.
    """
    _check_weight(p, n_min)
    z = _compatible_zeta(p)
    v = _integrate_once(p.n_half, z, p.grid)
    for _ in range(refine):
        r = z - p.apply(v)
        if p.grid.periodic:
            r = r - r.mean()
        v = v + _integrate_once(p.n_half, r, p.grid)
    if p.grid.periodic:
        v = v - v.mean()
    return v


def residual(p: SLProblem, v) -> float:
    return gc.l2_norm(p.apply(v) - p.zeta, p.grid)


@dataclass(frozen=True, eq=False)
class SLEigenbasis:
    """Nonzero eigenpairs of ``A``; ``vectors[m]`` has unit discrete L2 norm."""

    values: np.ndarray
    vectors: np.ndarray

    @property
    def count(self) -> int:
        return len(self.values)


def eigenbasis(p: SLProblem, K: int | None = None, n_min: float = N_MIN) -> SLEigenbasis:
    _check_weight(p, n_min)
    M = p.grid.M
    kmax = M - p.kernel_dim
    K = kmax if K is None else K
    if not 1 <= K <= kmax:
        raise ValueError(f"K must be in [1, {kmax}], got {K}")
    A = p.operator.toarray()
    lo = p.kernel_dim
    w, V = sla.eigh(A, subset_by_index=(lo, lo + K - 1))
    return SLEigenbasis(w, V.T / np.sqrt(p.grid.dx))


def solve_eigenbasis(p: SLProblem, K: int | None = None, n_min: float = N_MIN):
    """Spectral solution ``sum_m <e_m, zeta> e_m / lambda_m`` over ``K`` modes."""
    basis = eigenbasis(p, K, n_min)
    z = _compatible_zeta(p)
    coeff = basis.vectors @ z * p.grid.dx
    v = (coeff / basis.values) @ basis.vectors
    return v, basis


@dataclass(frozen=True)
class AdmissibilityReport:
    passes: bool
    inverse_power_integral: float
    lambda_1: float
    solution_bound: float
    min_half_weight: float


def lowest_eigenvalue(p: SLProblem) -> float:
    """Smallest nonzero eigenvalue of ``A`` by shift-invert Lanczos."""
    A = p.operator.tocsc().astype(float)
    k = 1 + p.kernel_dim
    scale = max(float(np.abs(A.diagonal()).max()), 1.0)
    try:
        vals = spla.eigsh(A, k=k, sigma=-1e-6 * scale, which="LM",
                          return_eigenvectors=False)
        vals = np.sort(vals)
    except Exception:
        vals = sla.eigh(A.toarray(), eigvals_only=True, subset_by_index=(0, k - 1))
    return float(max(vals[-1], 0.0))


def admissibility(p: SLProblem, s: float) -> AdmissibilityReport:
    """Diagnostic of the weight: ``int n^{-s}``, coercivity ``lambda_1``, solution bound."""
    if s <= 0.5:
        raise ValueError("exponent s must exceed 1/2 in one dimension")
    with np.errstate(divide="ignore", over="ignore"):
        powered = np.where(p.weight > 0, np.abs(p.weight) ** (-s), np.inf)
        integral = float(gc.integrate(powered, p.grid))
    lam = lowest_eigenvalue(p)
    zn = gc.l2_norm(p.zeta, p.grid)
    bound = zn / lam if lam > 0 else np.inf
    ok = bool(np.isfinite(integral) and p.n_half.min() > N_MIN and lam > 0)
    return AdmissibilityReport(ok, integral, lam, bound, float(p.n_half.min()))
