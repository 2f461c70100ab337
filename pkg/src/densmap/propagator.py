"""Time evolution under time-dependent potentials.

Three routes are provided: stepwise-static Crank-Nicolson (the workhorse),
exact evolution for static potentials through the full discrete spectrum, and
the truncated Dyson-Phillips (Neumann) series around free evolution.  The
first-order variation of the trajectory with respect to the potential is
given by :func:`functional_derivative_dpsi`.

All potentials passed in are one-body potentials ``v(t, x)``; for two
particles the multiplicative operator is ``v(t, x1) + v(t, x2)`` plus the pair
interaction carried by the :class:`~densmap.hamiltonian.HamiltonianSpec`.
The static potential stored in the spec is *not* added by the time-dependent
propagators: the trajectory is the whole external potential.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import grid as gc
from .errors import GridError, NumericalFailure
from .grid import Grid
from .hamiltonian import HamiltonianSpec, assemble, spectrum
from .wavefunction import WaveFunction, sobolev_norm

MEAN_ZERO = "mean_zero"
RAW = "raw"

MIDPOINT = "midpoint"
LEFT = "left"


@dataclass(frozen=True)
class TimeGrid:
    T: float
    n_steps: int

    def __post_init__(self):
        if not self.T > 0 or int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ValueError(f"invalid time grid T={self.T}, n_steps={self.n_steps}")
        object.__setattr__(self, "n_steps", int(self.n_steps))

    @property
    def dt(self) -> float:
        return self.T / self.n_steps

    @property
    def times(self) -> np.ndarray:
        t = np.arange(self.n_steps + 1) * self.dt
        t[-1] = self.T
        return t

    @property
    def n_nodes(self) -> int:
        return self.n_steps + 1


@dataclass(frozen=True, eq=False)
class PotentialTrajectory:
    """One-body potential sampled on ``time`` x ``grid`` (shape ``(n_nodes, M)``)."""

    values: np.ndarray
    grid: Grid
    time: TimeGrid
    gauge: str = RAW

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim == 1:
            v = np.broadcast_to(v, (self.time.n_nodes, v.size)).copy()
        if v.shape != (self.time.n_nodes, self.grid.M):
            raise GridError(
                f"potential of shape {v.shape} does not match"
                f" ({self.time.n_nodes}, {self.grid.M})"
            )
        if not np.all(np.isfinite(v)):
            raise GridError("potential contains non-finite entries")
        if self.gauge == MEAN_ZERO:
            v = v - v.mean(axis=1, keepdims=True)
        elif self.gauge != RAW:
            raise ValueError(f"unknown gauge {self.gauge!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @classmethod
    def from_function(cls, func, grid: Grid, time: TimeGrid, gauge: str = RAW):
        """Sample ``func(t, x)`` (vectorized over ``x``) at every time node."""
        vals = np.array([np.broadcast_to(func(t, grid.x), grid.x.shape) for t in time.times])
        return cls(vals, grid, time, gauge)

    @classmethod
    def static(cls, v, grid: Grid, time: TimeGrid, gauge: str = RAW):
        return cls(np.asarray(v, dtype=float), grid, time, gauge)

    def mean_zero(self) -> "PotentialTrajectory":
        return PotentialTrajectory(self.values, self.grid, self.time, MEAN_ZERO)

    def __add__(self, other: "PotentialTrajectory") -> "PotentialTrajectory":
        return PotentialTrajectory(self.values + other.values, self.grid, self.time)

    def scaled(self, c: float) -> "PotentialTrajectory":
        return PotentialTrajectory(c * self.values, self.grid, self.time, self.gauge)

    def step_values(self, k: int, sampling: str = MIDPOINT) -> np.ndarray:
        """Potential frozen over step ``k`` (from node ``k`` to ``k + 1``)."""
        if sampling == MIDPOINT:
            return 0.5 * (self.values[k] + self.values[k + 1])
        if sampling == LEFT:
            return self.values[k]
        raise ValueError(f"unknown sampling {sampling!r}")

    def lipschitz_constant(self) -> float:
        """Largest sup-norm difference quotient between consecutive samples."""
        d = np.abs(np.diff(self.values, axis=0)).max(axis=1)
        return float(d.max() / self.time.dt) if d.size else 0.0


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Wavefunction snapshots ``states[i]`` at ``times[i]``."""

    states: np.ndarray
    grid: Grid
    times: np.ndarray
    symmetry: str = "none"
    provenance: dict = field(default_factory=dict)

    @property
    def rank(self) -> int:
        return self.states.ndim - 1

    @property
    def n_nodes(self) -> int:
        return self.states.shape[0]

    def state(self, i: int) -> WaveFunction:
        return WaveFunction(self.states[i], self.grid, self.symmetry)

    def norms(self) -> np.ndarray:
        axes = tuple(range(1, self.states.ndim))
        return np.sqrt(np.sum(np.abs(self.states) ** 2, axis=axes) * self.grid.dx**self.rank)

    def distance(self, other: "Trajectory") -> np.ndarray:
        """Discrete L2 distance between snapshots at every node."""
        axes = tuple(range(1, self.states.ndim))
        d = np.sum(np.abs(self.states - other.states) ** 2, axis=axes)
        return np.sqrt(d * self.grid.dx**self.rank)


def one_body_sum(v: np.ndarray, rank: int) -> np.ndarray:
    """``v(x)`` for one particle, ``v(x1) + v(x2)`` for two."""
    return v if rank == 1 else v[:, None] + v[None, :]


class CrankNicolson:
    """Static Crank-Nicolson steps ``(1 + i dt H/2) psi' = (1 - i dt H/2) psi``.

    The LU factorization of the last potential is cached, so runs with a
    static potential factor the matrix once.
    """

    def __init__(self, spec: HamiltonianSpec):
        self.spec = spec
        H = assemble(spec)
        self._kinetic = H.kinetic.astype(complex).tocsc()
        self._fixed = H.fixed_diagonal
        self._eye = sp.identity(spec.dim, dtype=complex, format="csc")
        self._key = None
        self._lu = None
        self._rhs = None

    def _prepare(self, v: np.ndarray, dt: float):
        key = (dt, v.tobytes())
        if key == self._key:
            return
        diag = one_body_sum(v, self.spec.rank).ravel() + self._fixed
        Hm = self._kinetic + sp.diags(diag.astype(complex), format="csc")
        A = (self._eye + 0.5j * dt * Hm).tocsc()
        try:
            self._lu = spla.splu(A)
        except RuntimeError as exc:
            raise NumericalFailure(f"Crank-Nicolson factorization failed: {exc}") from exc
        self._rhs = (self._eye - 0.5j * dt * Hm).tocsr()
        self._key = key

    def step(self, psi: np.ndarray, v: np.ndarray, dt: float) -> np.ndarray:
        """One step of length ``dt`` (may be negative) with frozen one-body ``v``."""
        self._prepare(np.asarray(v, dtype=float), dt)
        shape = psi.shape
        out = self._lu.solve(self._rhs @ psi.ravel()).reshape(shape)
        if not np.all(np.isfinite(out)):
            raise NumericalFailure("non-finite amplitudes after Crank-Nicolson step")
        return out

    def solve_left(self, rhs: np.ndarray, v: np.ndarray, dt: float) -> np.ndarray:
        """Apply ``(1 + i dt H/2)^{-1}`` for the frozen potential ``v``."""
        self._prepare(np.asarray(v, dtype=float), dt)
        return self._lu.solve(rhs.ravel()).reshape(rhs.shape)


def _check_inputs(psi0: WaveFunction, v: PotentialTrajectory, spec: HamiltonianSpec):
    if psi0.grid != spec.grid or v.grid != spec.grid:
        raise GridError("initial state, potential and Hamiltonian grids differ")
    if psi0.rank != spec.rank:
        raise GridError(f"rank-{psi0.rank} state for an N={spec.n_particles} Hamiltonian")


def propagate_stepwise_static(psi0: WaveFunction, v: PotentialTrajectory,
                              spec: HamiltonianSpec, sampling: str = MIDPOINT,
                              start: int = 0, stop: int | None = None) -> Trajectory:
    """Evolve ``psi0`` from node ``start`` to ``stop`` with piecewise-frozen potentials.

    Each step applies one Crank-Nicolson solve with the potential frozen over
    the step: ``sampling='midpoint'`` uses the average of the two bracketing
    samples (second order in time), ``sampling='left'`` the left sample.
    """
    _check_inputs(psi0, v, spec)
    stop = v.time.n_steps if stop is None else stop
    if not 0 <= start <= stop <= v.time.n_steps:
        raise ValueError(f"invalid node range [{start}, {stop}]")
    cn = CrankNicolson(spec)
    dt = v.time.dt
    states = np.empty((stop - start + 1,) + psi0.values.shape, dtype=complex)
    psi = np.array(psi0.values)
    states[0] = psi
    for i, k in enumerate(range(start, stop), start=1):
        psi = cn.step(psi, v.step_values(k, sampling), dt)
        states[i] = psi
    return Trajectory(states, spec.grid, v.time.times[start:stop + 1], psi0.symmetry,
                      {"method": "stepwise_static_cn", "sampling": sampling, "dt": dt})


def propagate_spectral_static(psi0: WaveFunction, spec: HamiltonianSpec, times,
                              decomposition=None) -> Trajectory:
    """Exact evolution ``sum_k <e_k, psi0> exp(-i eps_k t) e_k`` for the static spec."""
    if psi0.grid != spec.grid or psi0.rank != spec.rank:
        raise GridError("initial state does not match the Hamiltonian")
    dec = decomposition if decomposition is not None else spectrum(spec)
    times = np.asarray(times, dtype=float)
    E = dec.vectors.reshape(dec.count, -1)
    w = spec.grid.dx**spec.rank
    coeff = (E.conj() @ psi0.values.ravel()) * w
    phases = np.exp(-1j * np.outer(times, dec.values))
    states = (phases * coeff) @ E
    return Trajectory(states.reshape((len(times),) + spec.shape), spec.grid, times,
                      psi0.symmetry, {"method": "spectral_static"})


def _free_spec(spec: HamiltonianSpec) -> HamiltonianSpec:
    return spec.with_potential(np.zeros(spec.grid.M))


def neumann_terms(psi0: WaveFunction, v: PotentialTrajectory, spec: HamiltonianSpec,
                  order: int) -> np.ndarray:
    """Dyson-Phillips terms ``Q_v^k U_0 psi0`` for ``k = 0..order``.

    ``Q_v phi(t) = -i int_0^t U_0(t - s) v(s) phi(s) ds`` with the trapezoidal
    rule on the time grid; ``U_0`` is the exact free evolution of the spec
    with its static potential set to zero (interaction retained).
    Returns an array of shape ``(order + 1, n_nodes) + spec.shape``.
    """
    if order < 0:
        raise ValueError(f"series order must be >= 0, got {order}")
    _check_inputs(psi0, v, spec)
    free = _free_spec(spec)
    dec = spectrum(free)
    t = v.time.times
    dt = v.time.dt
    E = dec.vectors.reshape(dec.count, -1) * np.sqrt(spec.grid.dx**spec.rank)  # Euclidean-orthonormal rows
    eps = dec.values
    back = np.exp(1j * np.outer(t, eps))     # U_0(-s) in the eigenbasis
    fwd = np.exp(-1j * np.outer(t, eps))
    V = np.array([one_body_sum(v.values[i], spec.rank).ravel() for i in range(len(t))])

    terms = np.empty((order + 1, len(t), spec.dim), dtype=complex)
    c0 = E.conj() @ psi0.values.ravel()
    terms[0] = (fwd * c0) @ E
    for k in range(1, order + 1):
        a = back * ((V * terms[k - 1]) @ E.conj().T)
        S = np.zeros_like(a)
        S[1:] = np.cumsum(0.5 * dt * (a[1:] + a[:-1]), axis=0)
        terms[k] = -1j * ((fwd * S) @ E)
    return terms.reshape((order + 1, len(t)) + spec.shape)


def propagate_neumann_series(psi0: WaveFunction, v: PotentialTrajectory,
                             spec: HamiltonianSpec, order: int) -> Trajectory:
    """Truncated series ``sum_{k<=order} Q_v^k U_0 psi0`` (not renormalized)."""
    terms = neumann_terms(psi0, v, spec, order)
    return Trajectory(terms.sum(axis=0), spec.grid, v.time.times, psi0.symmetry,
                      {"method": "neumann_series", "order": order})


def functional_derivative_dpsi(psi0: WaveFunction, v: PotentialTrajectory,
                               w: PotentialTrajectory, spec: HamiltonianSpec,
                               sampling: str = MIDPOINT,
                               trajectory: Trajectory | None = None) -> Trajectory:
    """First variation ``-i int_0^t U([v],t,s) w(s) psi([v],s) ds``.

    The integral is the trapezoidal rule on the time grid and ``U([v], t, s)``
    is realized by the same stepwise-static propagator as ``psi([v])``, via
    the recursion ``d_{n+1} = U_n (d_n - i dt/2 w_n psi_n) - i dt/2 w_{n+1} psi_{n+1}``.
    """
    _check_inputs(psi0, v, spec)
    if w.grid != spec.grid or w.time != v.time:
        raise GridError("perturbation is sampled on different grids")
    traj = trajectory if trajectory is not None else propagate_stepwise_static(
        psi0, v, spec, sampling)
    cn = CrankNicolson(spec)
    dt = v.time.dt
    r = spec.rank
    out = np.zeros_like(traj.states)
    for n in range(v.time.n_steps):
        src = out[n] - 0.5j * dt * one_body_sum(w.values[n], r) * traj.states[n]
        out[n + 1] = (cn.step(src, v.step_values(n, sampling), dt)
                      - 0.5j * dt * one_body_sum(w.values[n + 1], r) * traj.states[n + 1])
    return Trajectory(out, spec.grid, traj.times, traj.symmetry,
                      {"method": "functional_derivative", "sampling": sampling})


def sobolev_growth_bound(psi0: WaveFunction, v: PotentialTrajectory) -> np.ndarray:
    """Gronwall-type ceiling ``(1 + ||v(0)||_inf) exp(sqrt(2) L t) ||psi0||_{H^2}``."""
    L = v.lipschitz_constant()
    v0 = float(np.max(np.abs(v.values[0])))
    return (1.0 + v0) * np.exp(np.sqrt(2.0) * L * v.time.times) * sobolev_norm(psi0, 2)
