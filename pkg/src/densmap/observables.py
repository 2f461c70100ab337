"""Densities, currents, the internal-forces term and force diagnostics."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import grid as gc
from .errors import GridError
from .grid import Grid
from .hamiltonian import HamiltonianSpec
from .propagator import PotentialTrajectory, Trajectory
from .sturm_liouville import ARITHMETIC, half_weights
from .wavefunction import WaveFunction

N_FLOOR = 1e-14


@dataclass(frozen=True, eq=False)
class DensityTrajectory:
    """Density ``n(t_i, x)`` sampled at uniformly spaced ``times``."""

    values: np.ndarray
    grid: Grid
    times: np.ndarray
    n_particles: int = 1

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        t = np.array(self.times, dtype=float)
        if v.ndim != 2 or v.shape != (t.size, self.grid.M):
            raise GridError(f"density of shape {v.shape} does not match {t.size} x {self.grid.M}")
        v.setflags(write=False)
        t.setflags(write=False)
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "times", t)

    @property
    def dt(self) -> float:
        return float(self.times[1] - self.times[0])

    @property
    def n_nodes(self) -> int:
        return self.values.shape[0]

    def particle_numbers(self) -> np.ndarray:
        return gc.integrate(self.values, self.grid, 1)

    def invariant_violations(self, tol_neg: float = 1e-12, tol_n: float = 1e-8) -> list[str]:
        """Human-readable list of broken invariants (empty when all hold)."""
        problems = []
        if self.values.min() < -tol_neg:
            problems.append(f"negative density {self.values.min():.3e}")
        dev = np.max(np.abs(self.particle_numbers() - self.n_particles))
        if dev > tol_n:
            problems.append(f"particle number off by {dev:.3e}")
        return problems


def density(psi: WaveFunction) -> np.ndarray:
    """``N`` times the one-particle marginal of ``|psi|^2``."""
    rho = np.abs(psi.values) ** 2
    if psi.rank == 1:
        return rho
    return 2.0 * rho.sum(axis=1) * psi.grid.dx


def density_trajectory(traj: Trajectory) -> DensityTrajectory:
    rho = np.abs(traj.states) ** 2
    if traj.rank == 2:
        rho = 2.0 * rho.sum(axis=2) * traj.grid.dx
    return DensityTrajectory(rho, traj.grid, traj.times, traj.rank)


def _half_products(values: np.ndarray, grid: Grid, rank: int) -> np.ndarray:
    """``N sum_xbar conj(psi[m]) psi[m+1] dxbar`` at the half-grid points."""
    a = values
    if grid.periodic:
        b = np.roll(a, -1, axis=0)
        prod = np.conj(a) * b
    else:
        pad = [(1, 1)] + [(0, 0)] * (rank - 1)
        ap = np.pad(a, pad)
        prod = np.conj(ap[:-1]) * ap[1:]
    if rank == 2:
        prod = 2.0 * prod.sum(axis=1) * grid.dx
    return prod


def current(psi: WaveFunction) -> np.ndarray:
    """Staggered current ``J[m+1/2] = N Im(conj(psi[m]) psi[m+1]) / dx``.

    Periodic grids return ``M`` values; Dirichlet grids ``M + 1`` values
    whose end entries vanish.
    """
    return np.imag(_half_products(psi.values, psi.grid, psi.rank)) / psi.grid.dx


def half_grid_weight(psi: WaveFunction) -> np.ndarray:
    """``N Re(conj(psi[m]) psi[m+1])``: the density weight of the discrete force law."""
    return np.real(_half_products(psi.values, psi.grid, psi.rank))


def current_divergence(J, grid: Grid) -> np.ndarray:
    return gc.backward_divergence(J, grid)


def continuity_residuals(traj: Trajectory) -> np.ndarray:
    """Per-step ``(n_new - n_old)/dt + div J_mid`` with ``J_mid`` from the CN midpoint state.

    Returns shape ``(n_steps, M)``.
    """
    dt = np.diff(traj.times)
    n = density_trajectory(traj).values
    out = np.empty((traj.n_nodes - 1, traj.grid.M))
    for k in range(traj.n_nodes - 1):
        mid = WaveFunction(0.5 * (traj.states[k] + traj.states[k + 1]), traj.grid, traj.symmetry)
        out[k] = (n[k + 1] - n[k]) / dt[k] + current_divergence(current(mid), traj.grid)
    return out


def internal_force_q(psi: WaveFunction, spec: HamiltonianSpec) -> np.ndarray:
    """Internal-forces term from the integrated-by-parts form.

    ``q(x) = N int ( 1/2 |Lap psi|^2 - 1/2 Re(conj(psi) Lap^2 psi)
    + w(x - x2) (d2 + d1) . d2 |psi|^2 ) dx2`` with the Laplacian acting on
    the tagged coordinate only and all derivatives finite differences.  For
    one particle the sum over partners is empty.

    The interaction term uses the central difference ``D`` for both
    coordinates, so ``(D1 + D2)`` commutes with ``w(x1 - x2)`` on a periodic
    grid and the integral of ``q`` telescopes to zero exactly.
    """
    if psi.grid != spec.grid:
        raise GridError("wavefunction and Hamiltonian live on different grids")
    g, f = psi.grid, psi.values
    lap = gc.apply_laplacian(f, g, axis=0)
    lap2 = gc.apply_laplacian(lap, g, axis=0)
    kin = 0.5 * np.abs(lap) ** 2 - 0.5 * np.real(np.conj(f) * lap2)
    if psi.rank == 1:
        return kin
    integrand = kin
    w = spec.pair_potential
    if w is not None:
        rho = np.abs(f) ** 2
        d2 = gc.central_difference(rho, g, axis=1)
        integrand = integrand + w * (gc.central_difference(d2, g, axis=1)
                                     + gc.central_difference(d2, g, axis=0))
    return 2.0 * integrand.sum(axis=1) * g.dx


def force_divergence(n, v, grid: Grid) -> np.ndarray:
    """``div(n grad v)`` with arithmetic half-grid weights ``(n[m] + n[m+1]) / 2``."""
    wts = half_weights(n, grid, ARITHMETIC)
    return gc.backward_divergence(wts * gc.forward_difference(v, grid), grid)


def _time_derivative(values: np.ndarray, dt: float, order: int) -> np.ndarray:
    f = np.asarray(values, dtype=float)
    if f.shape[0] < 5:
        raise ValueError("time derivatives need at least 5 time nodes")
    out = np.empty_like(f)
    if order == 1:
        out[2:-2] = (-f[4:] + 8 * f[3:-1] - 8 * f[1:-3] + f[:-4]) / (12 * dt)
        out[0] = (-25 * f[0] + 48 * f[1] - 36 * f[2] + 16 * f[3] - 3 * f[4]) / (12 * dt)
        out[1] = (-3 * f[0] - 10 * f[1] + 18 * f[2] - 6 * f[3] + f[4]) / (12 * dt)
        out[-2] = (3 * f[-1] + 10 * f[-2] - 18 * f[-3] + 6 * f[-4] - f[-5]) / (12 * dt)
        out[-1] = (25 * f[-1] - 48 * f[-2] + 36 * f[-3] - 16 * f[-4] + 3 * f[-5]) / (12 * dt)
    else:
        out[2:-2] = (-f[4:] + 16 * f[3:-1] - 30 * f[2:-2] + 16 * f[1:-3] - f[:-4]) / (12 * dt**2)
        out[0] = (2 * f[0] - 5 * f[1] + 4 * f[2] - f[3]) / dt**2
        out[1] = (f[2] - 2 * f[1] + f[0]) / dt**2
        out[-2] = (f[-1] - 2 * f[-2] + f[-3]) / dt**2
        out[-1] = (2 * f[-1] - 5 * f[-2] + 4 * f[-3] - f[-4]) / dt**2
    return out


def dt_density(n: DensityTrajectory) -> np.ndarray:
    """First time derivative, fourth order at every node (one-sided five-point stencils near the ends)."""
    return _time_derivative(n.values, n.dt, 1)


def dtt_density(n: DensityTrajectory) -> np.ndarray:
    """Second time derivative: fourth order inside, second order at the two end nodes.

    The outermost nodes use one-sided four-point formulas and their neighbours
    the three-point centered formula.
    """
    return _time_derivative(n.values, n.dt, 2)


def dtt_series(values, dt: float) -> np.ndarray:
    """Same stencils as :func:`dtt_density` for any array with time on axis 0."""
    return _time_derivative(values, dt, 2)


@dataclass(frozen=True)
class ForceBalance:
    times: np.ndarray
    F_pot: np.ndarray
    F_newton: np.ndarray
    flagged: bool

    @property
    def max_gap(self) -> float:
        return float(np.max(np.abs(self.F_pot - self.F_newton)))


def global_force_balance(traj: Trajectory, v: PotentialTrajectory) -> ForceBalance:
    """Net external force ``-int n grad v`` against ``d^2/dt^2 int x n``.

    ``flagged`` is set on periodic grids, where the dipole moment is not a
    well-defined observable and the two series need not agree.
    """
    n = density_trajectory(traj)
    g = traj.grid
    grad_v = gc.central_difference(v.values, g, axis=1)
    F_pot = -gc.integrate(n.values * grad_v, g, 1)
    dipole = gc.integrate(n.values * g.x, g, 1)
    F_newton = dtt_series(dipole, n.dt)
    return ForceBalance(np.asarray(traj.times), F_pot, F_newton, g.periodic)


@dataclass(frozen=True)
class WeightReport:
    inverse_power_integral: float
    weizsacker: float
    finite_force: float | None
    refinement_ratio: float
    refinement_unstable: bool
    weizsacker_bound_ok: bool | None


def weight_diagnostics(n, grid: Grid, s: float, psi: WaveFunction | None = None,
                       dtj=None) -> WeightReport:
    """Integrability diagnostics of a density used as Sturm-Liouville weight.

    ``int n^{-s}`` (n floored at 1e-14), the Weizsaecker term
    ``int |grad sqrt n|^2`` on the staggered grid, and optionally the force
    integral ``int |dtj|^2 / n`` for a half-grid ``dtj``.  The ``-s`` integral
    is recomputed on the every-other-node subgrid; growth by more than 25 %
    under the refinement marks it ``refinement_unstable``.  With ``psi`` the
    bound ``||grad sqrt n|| <= sqrt(N) ||grad psi||`` is checked.
    """
    if s <= 0.5:
        raise ValueError("exponent s must exceed d/2 = 1/2")
    n = np.asarray(grid.check(n), dtype=float)
    if n.min() < -1e-12:
        raise ValueError("density must be nonnegative")
    floored = np.maximum(n, N_FLOOR)
    fine = float(gc.integrate(floored ** (-s), grid))
    coarse = float(np.sum(floored[1::2] ** (-s)) * 2 * grid.dx)
    ratio = fine / coarse if coarse > 0 else np.inf
    root = np.sqrt(np.maximum(n, 0.0))
    weiz = float(np.sum(gc.forward_difference(root, grid) ** 2) * grid.dx)
    force = None
    if dtj is not None:
        dtj = np.asarray(dtj, dtype=float)
        nh = half_weights(floored, grid, ARITHMETIC)
        force = float(np.sum(dtj**2 / nh) * grid.dx)
    bound_ok = None
    if psi is not None:
        grad = 0.0
        for ax in range(psi.rank):
            d = gc.forward_difference(psi.values, grid, axis=ax)
            grad += np.sum(np.abs(d) ** 2) * grid.dx**psi.rank
        bound_ok = bool(np.sqrt(weiz) <= np.sqrt(psi.n_particles * grad) * (1 + 1e-12))
    return WeightReport(fine, weiz, force, ratio, bool(ratio > 1.25), bound_ok)
