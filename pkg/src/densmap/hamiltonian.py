"""Discrete Hamiltonians ``H = -1/2 Laplacian + v (+ w)`` and their spectra."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import grid as gc
from .errors import GridError, NumericalFailure, WaveFunctionError
from .grid import Grid
from .wavefunction import SYMMETRIC, WaveFunction

log = logging.getLogger(__name__)

DENSE_LIMIT = 4096


@dataclass(frozen=True)
class SoftCore:
    """Pair potential ``w(u) = strength / sqrt(u**2 + softening**2)``."""

    strength: float = 1.0
    softening: float = 1.0

    def __call__(self, u):
        return self.strength / np.sqrt(np.asarray(u) ** 2 + self.softening**2)


def pair_separation(grid: Grid) -> np.ndarray:
    """Matrix of ``x1 - x2``; minimum-image convention on periodic grids."""
    u = grid.x[:, None] - grid.x[None, :]
    if grid.periodic:
        u = u - grid.L * np.round(u / grid.L)
    return u


@dataclass(frozen=True, eq=False)
class HamiltonianSpec:
    grid: Grid
    v_static: np.ndarray
    interaction: SoftCore | None = None
    n_particles: int = 1

    def __post_init__(self):
        v = np.array(self.v_static, dtype=float)
        if v.shape == ():
            v = np.full(self.grid.M, float(v))
        self.grid.check(v, 1)
        if not np.all(np.isfinite(v)):
            raise GridError("static potential contains non-finite entries")
        if self.n_particles not in (1, 2):
            raise ValueError("only N = 1 or N = 2 particles are supported")
        v.setflags(write=False)
        object.__setattr__(self, "v_static", v)

    @property
    def rank(self) -> int:
        return self.n_particles

    @property
    def dim(self) -> int:
        return self.grid.M ** self.n_particles

    @property
    def shape(self) -> tuple:
        return (self.grid.M,) * self.n_particles

    def with_potential(self, v) -> "HamiltonianSpec":
        return replace(self, v_static=np.asarray(v, dtype=float))

    @cached_property
    def pair_potential(self) -> np.ndarray | None:
        """``w(x1 - x2)`` on the tensor grid, or None without interaction."""
        if self.interaction is None or self.n_particles == 1:
            return None
        return self.interaction(pair_separation(self.grid))

    def total_potential(self, v=None) -> np.ndarray:
        """Multiplicative part on the configuration grid for one-body potential ``v``."""
        v = self.v_static if v is None else np.asarray(v, dtype=float)
        if self.n_particles == 1:
            return v
        V = v[:, None] + v[None, :]
        if self.pair_potential is not None:
            V = V + self.pair_potential
        return V


@dataclass(frozen=True, eq=False)
class Hamiltonian:
    """Assembled symmetric operator for a :class:`HamiltonianSpec`."""

    spec: HamiltonianSpec

    @cached_property
    def kinetic(self) -> sp.csr_matrix:
        """Sparse ``-1/2 Laplacian`` on the configuration grid (flattened C order)."""
        L1 = gc.laplacian_matrix(self.spec.grid)
        if self.spec.n_particles == 1:
            return (-0.5 * L1).tocsr()
        eye = sp.identity(self.spec.grid.M, format="csr")
        return (-0.5 * (sp.kron(L1, eye) + sp.kron(eye, L1))).tocsr()

    @cached_property
    def fixed_diagonal(self) -> np.ndarray:
        """Interaction part of the diagonal (zeros for N = 1)."""
        pp = self.spec.pair_potential
        return np.zeros(self.spec.dim) if pp is None else pp.ravel()

    def potential_diagonal(self, v=None) -> np.ndarray:
        return np.asarray(self.spec.total_potential(v)).ravel()

    def matrix(self, v=None) -> sp.csr_matrix:
        return (self.kinetic + sp.diags(self.potential_diagonal(v))).tocsr()

    def dense(self, v=None) -> np.ndarray:
        return self.matrix(v).toarray()

    def apply(self, psi, v=None) -> np.ndarray:
        """``H psi`` for a field of shape ``spec.shape`` (matrix free)."""
        s = self.spec
        if isinstance(psi, WaveFunction):
            if psi.grid != s.grid:
                raise GridError("wavefunction and Hamiltonian live on different grids")
            psi = psi.values
        psi = np.asarray(psi)
        if psi.ndim != s.rank:
            raise WaveFunctionError(
                f"{s.n_particles}-particle Hamiltonian applied to rank-{psi.ndim} field"
            )
        s.grid.check(psi, s.rank)
        return -0.5 * gc.laplacian_all(psi, s.grid, s.rank) + s.total_potential(v) * psi

    def expectation(self, psi: WaveFunction) -> float:
        return float(np.real(psi.inner(psi.with_values(self.apply(psi)))))


def assemble(spec: HamiltonianSpec) -> Hamiltonian:
    return Hamiltonian(spec)


@dataclass(frozen=True, eq=False)
class SpectralDecomposition:
    """Lowest eigenpairs; ``vectors[k]`` has shape ``spec.shape`` and unit discrete norm."""

    values: np.ndarray
    vectors: np.ndarray
    grid: Grid

    @property
    def count(self) -> int:
        return len(self.values)

    def state(self, k: int, symmetry: str = "none") -> WaveFunction:
        return WaveFunction(self.vectors[k], self.grid, symmetry)


def _fix_sign(vecs: np.ndarray) -> np.ndarray:
    """Make the first significant component of every column positive."""
    out = vecs.copy()
    for k in range(out.shape[1]):
        col = out[:, k]
        tol = 1e-8 * np.max(np.abs(col))
        idx = np.flatnonzero(np.abs(col) > tol)[0]
        if col[idx] < 0:
            out[:, k] = -col
    return out


def spectrum(spec: HamiltonianSpec, K: int | None = None,
             symmetry: str | None = None) -> SpectralDecomposition:
    """The ``K`` lowest eigenpairs of the assembled matrix (all of them if None).

    For two particles ``symmetry`` restricts to exchange-symmetric or
    antisymmetric eigenvectors; the full product space is used when None.
    """
    H = assemble(spec)
    dim = spec.dim
    if K is None:
        K = dim
    if not 1 <= K <= dim:
        raise ValueError(f"K must be in [1, {dim}], got {K}")
    if dim > DENSE_LIMIT:
        raise NumericalFailure(
            f"dense eigensolve limited to dimension {DENSE_LIMIT}; use ground_state"
        )
    A = H.dense()
    if symmetry is not None and spec.n_particles == 2:
        P = _exchange_basis(spec.grid.M, symmetry)
        A = P.T @ A @ P
        K = min(K, A.shape[0])
    try:
        w, V = sla.eigh(A, subset_by_index=(0, K - 1))
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericalFailure(f"eigensolver failed: {exc}") from exc
    if symmetry is not None and spec.n_particles == 2:
        V = P @ V
    V = _fix_sign(V) / np.sqrt(spec.grid.dx ** spec.rank)
    vecs = V.T.reshape((K,) + spec.shape)
    return SpectralDecomposition(w, vecs, spec.grid)


def _exchange_basis(M: int, symmetry: str) -> np.ndarray:
    """Orthonormal basis (columns) of the (anti)symmetric subspace of C^M x C^M."""
    cols = []
    for i in range(M):
        for j in range(i, M):
            e = np.zeros((M, M))
            if i == j:
                if symmetry != SYMMETRIC:
                    continue
                e[i, i] = 1.0
            else:
                e[i, j] = 1.0 / np.sqrt(2.0)
                e[j, i] = (1.0 if symmetry == SYMMETRIC else -1.0) / np.sqrt(2.0)
            cols.append(e.ravel())
    return np.array(cols).T


def ground_state(spec: HamiltonianSpec, symmetry: str | None = None) -> WaveFunction:
    """Normalized lowest eigenvector, real with its largest entry positive.

    A (near-)degenerate lowest level is logged and the first vector returned.
    Above the dense limit the state is found by shifted inverse iteration.
    """
    if spec.dim > DENSE_LIMIT:
        vec, gap = _inverse_iteration(spec)
    else:
        dec = spectrum(spec, min(2, spec.dim), symmetry)
        vec = dec.vectors[0]
        gap = dec.values[1] - dec.values[0] if dec.count > 1 else np.inf
    if gap < 1e-12:
        log.warning("lowest level is degenerate within %.1e; returning first vector", gap)
    vec = np.real(vec)
    if vec.flat[np.argmax(np.abs(vec))] < 0:
        vec = -vec
    tag = symmetry if (symmetry is not None and spec.n_particles == 2) else "none"
    psi = WaveFunction(vec, spec.grid, tag)
    return psi.with_values(psi.values / psi.norm())


def _inverse_iteration(spec: HamiltonianSpec):
    H = assemble(spec).matrix().tocsc()
    # a Gershgorin lower bound keeps the shift below the whole spectrum
    diag = H.diagonal().real
    off = np.asarray(abs(H).sum(axis=1)).ravel() - np.abs(diag)
    sigma = float(np.min(diag - off)) - 1.0
    try:
        w, V = spla.eigsh(H, k=2, sigma=sigma, which="LM")
    except Exception as exc:  # ARPACK raises several unrelated types
        raise NumericalFailure(f"inverse iteration failed: {exc}") from exc
    order = np.argsort(w)
    vec = V[:, order[0]].reshape(spec.shape) / np.sqrt(spec.grid.dx ** spec.rank)
    return vec, w[order[1]] - w[order[0]]
