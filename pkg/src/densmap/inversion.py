"""Potential reconstruction from a prescribed density.

Four routes share the divergence-form equation ``-div(n grad v) = q - d_t^2 n``:

* :func:`invert_fixed_point` iterates the map ``v -> SL^{-1}(q[psi[v]] - d_t^2 n)``
  with the weight taken from the target density.
* :func:`invert_taylor_rg` determines the Taylor coefficients of ``v`` at
  ``t = 0`` order by order from those of the density.
* :func:`invert_single_particle_hj` is the closed-form single-particle
  inversion through the polar form ``psi = sqrt(n) exp(iS)``.
* :func:`construct_ks_potential` applies the single-particle route to one
  doubly-occupied orbital.

The half-grid weight used by the iterative and Taylor routes is the geometric
mean ``sqrt(n[m] n[m+1])``.  It coincides with ``Re(conj(psi[m]) psi[m+1])``
for real positive states, which is the weight that makes the semi-discrete
force balance hold exactly, so a stationary problem is inverted to round-off.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from math import comb, factorial

import numpy as np
import scipy.fft as sfft
from scipy.optimize import brentq

from . import grid as gc
from . import observables as ob
from . import sturm_liouville as sl
from .errors import DegenerateWeight, IncompatibleInitialState, NumericalFailure
from .grid import Grid
from .hamiltonian import HamiltonianSpec
from .propagator import (MEAN_ZERO, MIDPOINT, CrankNicolson, PotentialTrajectory,
                         TimeGrid, Trajectory, propagate_stepwise_static)
from .wavefunction import WaveFunction

log = logging.getLogger(__name__)

TAYLOR_MAX_ORDER = 8
RAISE = "raise"
REPORT = "report"


def default_workers() -> int:
    """Worker count from ``DENSMAP_THREADS`` (default 1)."""
    raw = os.environ.get("DENSMAP_THREADS", "1")
    try:
        value = int(raw)
    except ValueError as exc:
        raise ValueError(f"DENSMAP_THREADS must be an integer, got {raw!r}") from exc
    if value < 1:
        raise ValueError(f"DENSMAP_THREADS must be >= 1, got {value}")
    return value


@dataclass(frozen=True)
class InversionConfig:
    """Controls of the fixed-point iteration.

    ``v0`` is the initial guess (zero when None), ``alpha`` the mixing
    parameter, ``tol_v`` the stopping threshold on the mean-removed
    sup-over-time L2 change, ``window`` an optional number of time steps per
    restart interval and ``degeneracy`` either ``"raise"`` or ``"report"``.
    ``cutoff`` (optional) keeps only the spatial modes up to that wavenumber
    index in every iterate.  Linearized, one sweep of the map acts on mode
    ``k`` as a Volterra operator with kernel ``w_k sin(w_k (t - s))``, where
    ``w_k`` grows like ``k**2 / 2``; once ``w_k T`` is large, round-off in those
    modes is amplified over many sweeps before it decays, and the cutoff
    removes them.
    """

    v0: PotentialTrajectory | None = None
    alpha: float = 1.0
    tol_v: float = 1e-8
    max_iter: int = 200
    window: int | None = None
    degeneracy: str = RAISE
    averaging: str = sl.GEOMETRIC
    sampling: str = MIDPOINT
    workers: int | None = None
    cutoff: int | None = None

    def __post_init__(self):
        if not 0 < self.alpha <= 1:
            raise ValueError(f"mixing alpha must lie in (0, 1], got {self.alpha}")
        if not self.tol_v > 0:
            raise ValueError("tol_v must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.window is not None and self.window < 4:
            raise ValueError("restart windows need at least 4 steps")
        if self.degeneracy not in (RAISE, REPORT):
            raise ValueError(f"unknown degeneracy policy {self.degeneracy!r}")
        if self.cutoff is not None and self.cutoff < 1:
            raise ValueError("cutoff must be a positive wavenumber index")


@dataclass(frozen=True)
class RhoReport:
    """Difference ``rho = n[v] - n_target`` between propagated and target density."""

    max_l1: float
    rho0_l1: float
    dt_rho0_l1: float
    max_abs_integral: float
    l1_series: np.ndarray

    @property
    def invariants_ok(self) -> bool:
        return self.max_abs_integral <= 1e-8


@dataclass
class FixedPointReport:
    residuals: list = field(default_factory=list)
    converged: bool = False
    rho: RhoReport | None = None
    balance_residual: float | None = None
    admissibility: sl.AdmissibilityReport | None = None
    message: str = ""

    @property
    def iterations(self) -> int:
        return len(self.residuals)

    @property
    def ratios(self) -> np.ndarray:
        r = np.asarray(self.residuals, dtype=float)
        if r.size < 2:
            return np.empty(0)
        with np.errstate(divide="ignore", invalid="ignore"):
            return r[1:] / r[:-1]

    @property
    def xi_hat(self) -> float:
        return float(self.ratios.max()) if self.ratios.size else np.nan

    @property
    def first_step_bound(self) -> float:
        """``r_0 / (1 - xi_hat)``, the distance of the first iterate to the limit."""
        if not self.residuals or not self.xi_hat < 1:
            return np.inf
        return self.residuals[0] / (1.0 - self.xi_hat)

    def rows(self):
        """``(iter, residual, ratio)`` tuples; the first ratio is NaN."""
        ratios = np.concatenate([[np.nan], self.ratios])
        return [(i, float(r), float(x)) for i, (r, x) in enumerate(zip(self.residuals, ratios))]


def mean_removed(v: np.ndarray) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    return v - v.mean(axis=-1, keepdims=True)


def relative_error(v, v_ref, grid: Grid) -> float:
    """``sup_t ||v - v_ref||_2 / sup_t ||v_ref||_2`` after per-node mean removal."""
    a, b = mean_removed(v), mean_removed(v_ref)
    num = np.max(gc.l2_norm(a - b, grid, 1))
    den = np.max(gc.l2_norm(b, grid, 1))
    return float(num / den) if den > 0 else float(num)


def spectral_cutoff(v: np.ndarray, grid: Grid, kmax: int) -> np.ndarray:
    """Project the last axis of ``v`` onto the modes with index ``<= kmax``.

    Fourier modes ``exp(i k x 2 pi / L)`` on rings, sine modes
    ``sin(k pi x / L)`` on Dirichlet grids.
    """
    v = np.asarray(v, dtype=float)
    if grid.periodic:
        F = sfft.rfft(v, axis=-1)
        F[..., kmax + 1:] = 0.0
        return sfft.irfft(F, grid.M, axis=-1)
    F = sfft.dst(v, type=1, axis=-1)
    F[..., kmax:] = 0.0
    return sfft.idst(F, type=1, axis=-1)


def _target_time(n: ob.DensityTrajectory) -> TimeGrid:
    return TimeGrid(float(n.times[-1] - n.times[0]), n.n_nodes - 1)


def check_initial_state(n: ob.DensityTrajectory, psi0: WaveFunction,
                        tol_n: float = 1e-6, tol_dn: float = 1e-4) -> None:
    """Raise unless ``n(0)`` and ``d_t n(0)`` fit the initial state."""
    g = n.grid
    n0 = ob.density(psi0)
    dev = float(np.sum(np.abs(n.values[0] - n0)) * g.dx)
    if dev > tol_n:
        raise IncompatibleInitialState(f"||n(0) - n[psi0]||_1 = {dev:.3e} exceeds {tol_n:g}")
    dn_data = ob.dt_density(n)[0]
    dn_state = -ob.current_divergence(ob.current(psi0), g)
    ddev = float(np.sum(np.abs(dn_data - dn_state)) * g.dx)
    if ddev > tol_dn:
        raise IncompatibleInitialState(
            f"||d_t n(0) + div J[psi0]||_1 = {ddev:.3e} exceeds {tol_dn:g}"
        )


def _q_series(traj: Trajectory, spec: HamiltonianSpec) -> np.ndarray:
    return np.array([ob.internal_force_q(traj.state(i), spec) for i in range(traj.n_nodes)])


class _NodeSolver:
    """Per-time-node Sturm-Liouville solves with the target density as weight."""

    def __init__(self, n: np.ndarray, grid: Grid, averaging: str, workers: int):
        self.grid = grid
        self.problems = [sl.SLProblem(n[i], np.zeros(grid.M), grid, averaging)
                         for i in range(n.shape[0])]
        self.workers = workers

    def _one(self, args):
        i, zeta = args
        p = self.problems[i].with_zeta(zeta - zeta.mean() if self.grid.periodic else zeta)
        return sl.solve_direct_1d(p)

    def solve(self, zeta: np.ndarray) -> np.ndarray:
        jobs = list(enumerate(zeta))
        if self.workers > 1:
            with ThreadPoolExecutor(self.workers) as ex:
                return np.array(list(ex.map(self._one, jobs)))
        return np.array([self._one(j) for j in jobs])

    def apply(self, v: np.ndarray) -> np.ndarray:
        return np.array([p.apply(v[i]) for i, p in enumerate(self.problems)])


def _iterate_window(n_vals, dtt, psi0, spec, v_init, time, cfg, solver, report):
    """Fixed-point iteration on one window; returns the converged values."""
    g = spec.grid
    v = np.array(v_init, dtype=float)
    for _ in range(cfg.max_iter):
        traj = propagate_stepwise_static(psi0, PotentialTrajectory(v, g, time), spec,
                                         cfg.sampling)
        zeta = _q_series(traj, spec) - dtt
        target = solver.solve(zeta)
        if cfg.cutoff is not None:
            target = spectral_cutoff(target, g, cfg.cutoff)
        v_new = (1.0 - cfg.alpha) * v + cfg.alpha * target
        r = float(np.max(gc.l2_norm(mean_removed(v_new - v), g, 1)))
        report.residuals.append(r)
        v = v_new
        if not np.isfinite(r):
            raise NumericalFailure("fixed-point iterate became non-finite")
        if r <= cfg.tol_v:
            return v, True
    return v, False


def invert_fixed_point(n: ob.DensityTrajectory, psi0: WaveFunction, spec: HamiltonianSpec,
                       cfg: InversionConfig | None = None):
    """Fixed-point inversion ``v_{i+1} = (1 - a) v_i + a SL^{-1}(q[v_i] - d_t^2 n)``.

    ``q[v_i]`` is evaluated on the trajectory of ``psi0`` under ``v_i`` and the
    Sturm-Liouville solve at every node uses ``n(t)`` as weight.  With
    ``cfg.window`` set, the horizon is split into restart windows; each window
    starts from the state reached under the potential converged on the
    previous one.  Returns ``(PotentialTrajectory, FixedPointReport)``; the
    potential is mean-zero gauged.
    """
    cfg = cfg or InversionConfig()
    g = spec.grid
    if n.grid != g or psi0.grid != g:
        raise NumericalFailure("density, state and Hamiltonian grids differ")
    check_initial_state(n, psi0)
    time = _target_time(n)
    report = FixedPointReport()
    workers = cfg.workers or default_workers()
    report.admissibility = sl.admissibility(
        sl.SLProblem(n.values[0], np.zeros(g.M), g, cfg.averaging), 1.0)
    dtt = ob.dtt_density(n)
    v0 = cfg.v0.values if cfg.v0 is not None else np.zeros((time.n_nodes, g.M))
    try:
        solver = _NodeSolver(n.values, g, cfg.averaging, workers)
        solver.solve(np.zeros_like(n.values[:1]))  # early degeneracy check
    except DegenerateWeight as exc:
        if cfg.degeneracy == RAISE:
            raise
        report.message = str(exc)
        return PotentialTrajectory(v0, g, time, MEAN_ZERO), report

    step = cfg.window or time.n_steps
    v_all = np.array(v0, dtype=float)
    psi_start = psi0
    converged = True
    for start in range(0, time.n_steps, step):
        stop = min(start + step, time.n_steps)
        sub_time = TimeGrid(time.dt * (stop - start), stop - start)
        sl_idx = slice(start, stop + 1)
        sub_solver = solver if step == time.n_steps else _NodeSolver(
            n.values[sl_idx], g, cfg.averaging, workers)
        sub_dtt = dtt[sl_idx]
        try:
            v_win, ok = _iterate_window(n.values[sl_idx], sub_dtt, psi_start, spec,
                                        v_all[sl_idx], sub_time, cfg, sub_solver, report)
        except DegenerateWeight as exc:
            if cfg.degeneracy == RAISE:
                raise
            report.message = str(exc)
            converged = False
            break
        v_all[sl_idx] = v_win
        converged &= ok
        if stop < time.n_steps:
            traj = propagate_stepwise_static(psi_start, PotentialTrajectory(v_win, g, sub_time),
                                             spec, cfg.sampling)
            psi_start = traj.state(traj.n_nodes - 1)

    v_out = PotentialTrajectory(v_all, g, time, MEAN_ZERO)
    report.converged = bool(converged)
    if not converged and not report.message:
        report.message = f"no convergence within {cfg.max_iter} iterations"
    traj = propagate_stepwise_static(psi0, v_out, spec, cfg.sampling)
    report.rho = _rho_from_trajectory(traj, n)
    # with a cutoff the fixed point solves the projected equation, so the
    # right-hand side is filtered the same way before comparing
    target = solver.solve(_q_series(traj, spec) - dtt)
    if cfg.cutoff is not None:
        target = spectral_cutoff(target, g, cfg.cutoff)
    balance = solver.apply(v_out.values) - solver.apply(target)
    report.balance_residual = float(np.max(gc.l2_norm(mean_removed(balance), g, 1)))
    return v_out, report


def _rho_from_trajectory(traj: Trajectory, n_target: ob.DensityTrajectory) -> RhoReport:
    g = n_target.grid
    rho = ob.density_trajectory(traj).values - n_target.values
    l1 = np.sum(np.abs(rho), axis=1) * g.dx
    dt_rho = ob.dt_density(ob.DensityTrajectory(rho + n_target.values, g, n_target.times,
                                                n_target.n_particles)) - ob.dt_density(n_target)
    ints = np.abs(gc.integrate(rho, g, 1))
    return RhoReport(float(l1.max()), float(l1[0]), float(np.sum(np.abs(dt_rho[0])) * g.dx),
                     float(ints.max()), l1)


def verify_rho_problem(v: PotentialTrajectory, n_target: ob.DensityTrajectory,
                       psi0: WaveFunction, spec: HamiltonianSpec,
                       sampling: str = MIDPOINT) -> RhoReport:
    """Propagate ``psi0`` under ``v`` and compare its density with the target."""
    if v.grid != n_target.grid or v.time.n_nodes != n_target.n_nodes:
        raise NumericalFailure("potential and target density are sampled differently")
    traj = propagate_stepwise_static(psi0, v, spec, sampling)
    return _rho_from_trajectory(traj, n_target)


# ---------------------------------------------------------------- Hamilton-Jacobi


def _phase_differences(flux: np.ndarray, root: np.ndarray, grid: Grid,
                       winding: float) -> np.ndarray:
    """Phase steps ``S[m+1] - S[m]`` from the staggered current.

    On the grid the current of ``R exp(iS)`` is ``R[m] R[m+1] sin(dS) / dx``,
    so ``dS = arcsin(dx J / (R[m] R[m+1]))``.  On a ring the free flux constant
    is fixed by requiring the steps to add up to ``2 pi winding``.
    """
    dx = grid.dx
    if grid.periodic:
        prod = root * np.roll(root, -1)
        if np.any(prod <= sl.N_MIN):
            raise DegenerateWeight("density vanishes between neighbouring nodes")

        def total(c):
            return np.sum(np.arcsin(np.clip(dx * (flux + c) / prod, -1, 1))) - 2 * np.pi * winding

        # admissible shifts keep |flux + c| below prod / dx everywhere
        lo = np.max(-prod / dx - flux)
        hi = np.min(prod / dx - flux)
        span = hi - lo
        if span <= 0:
            raise NumericalFailure("current too large for the density on this grid")
        a, b = lo + 1e-12 * span, hi - 1e-12 * span
        if total(a) * total(b) > 0:
            raise NumericalFailure("no phase consistent with the requested winding")
        c = brentq(total, a, b, xtol=1e-16 * max(1.0, abs(hi)), maxiter=200)
        ratio = dx * (flux + c) / prod
    else:
        prod = root[:-1] * root[1:]
        if np.any(prod <= sl.N_MIN):
            raise DegenerateWeight("density vanishes between neighbouring nodes")
        ratio = dx * flux / prod
    if np.any(np.abs(ratio) >= 1):
        raise NumericalFailure("current too large for the density on this grid")
    return np.arcsin(ratio)


def _phase_from_dn(dn: np.ndarray, n: np.ndarray, grid: Grid, winding: float) -> np.ndarray:
    """Mean-zero phase ``S`` solving the grid continuity equation ``-div J[S] = d_t n``."""
    dx = grid.dx
    root = np.sqrt(np.clip(n, 0.0, None))
    if grid.periodic:
        flux = -np.cumsum(dn) * dx            # J[m+1/2] up to a constant
        dS = _phase_differences(flux, root, grid, winding)
        S = np.concatenate([[0.0], np.cumsum(dS[:-1])])
    else:
        flux = -np.cumsum(dn)[:-1] * dx       # inner half points; boundary flux is zero
        dS = _phase_differences(flux, root, grid, winding)
        S = np.concatenate([[0.0], np.cumsum(dS)])
    return S - S.mean()


def _winding(S0, grid: Grid) -> float:
    if S0 is None or not grid.periodic:
        return 0.0
    S0 = np.asarray(grid.check(S0), dtype=float)
    steps = np.diff(np.concatenate([S0, [S0[0]]]))
    steps = (steps + np.pi) % (2 * np.pi) - np.pi
    return float(np.round(steps.sum() / (2 * np.pi)))


def hj_potential(n: np.ndarray, S: np.ndarray, dS_dt: np.ndarray, grid: Grid) -> np.ndarray:
    """``v = 1/2 Lap sqrt(n) / sqrt(n) - 1/2 (grad S)^2 - d_t S`` in grid form.

    The first two terms are evaluated together as
    ``Re(Lap psi / psi) / 2`` for ``psi = sqrt(n) exp(iS)``, i.e. with
    ``cos`` of the phase steps in place of the quadratic; this is the grid
    counterpart of the quantum-potential and kinetic terms.
    """
    R = np.sqrt(np.clip(n, 0.0, None))
    if np.any(R <= np.sqrt(sl.N_MIN)):
        raise DegenerateWeight("density vanishes at a node")
    p = grid.periodic
    Rp = gc._shift(R, 1, 0, p)
    Rm = gc._shift(R, -1, 0, p)
    Sp = gc._shift(S, 1, 0, p)
    Sm = gc._shift(S, -1, 0, p)
    lap_re = (Rp * np.cos(Sp - S) + Rm * np.cos(S - Sm) - 2 * R) / grid.dx**2
    return 0.5 * lap_re / R - dS_dt


def invert_single_particle_hj(n: ob.DensityTrajectory, S0=None) -> PotentialTrajectory:
    """Single-particle inversion through the polar form of the wavefunction.

    At each node the phase solves the continuity equation for the given
    ``d_t n``; ``S0`` (optional) fixes the winding number on a ring.  The
    potential follows from the Hamilton-Jacobi relation with ``d_t S`` from
    time differences of the mean-zero phases.  Returned mean-zero gauged.
    """
    if n.n_nodes < 3:
        raise ValueError("Hamilton-Jacobi inversion needs at least 3 time nodes")
    g = n.grid
    w = _winding(S0, g)
    if n.n_nodes >= 5:
        dn = ob.dt_density(n)
    else:
        dn = np.gradient(n.values, n.dt, axis=0)
    S = np.array([_phase_from_dn(dn[i], n.values[i], g, w) for i in range(n.n_nodes)])
    if S0 is not None and g.periodic:
        S0 = np.asarray(S0, dtype=float)
        S = _align_phase(S, S0)
    dS = ob._time_derivative(S, n.dt, 1) if n.n_nodes >= 5 else np.gradient(S, n.dt, axis=0)
    v = np.array([hj_potential(n.values[i], S[i], dS[i], g) for i in range(n.n_nodes)])
    return PotentialTrajectory(v, g, _target_time(n), MEAN_ZERO)


def _align_phase(S: np.ndarray, S0: np.ndarray) -> np.ndarray:
    """Replace the first-node phase by ``S0`` (unwrapped and mean-zero)."""
    steps = np.diff(S0)
    steps = (steps + np.pi) % (2 * np.pi) - np.pi
    first = np.concatenate([[0.0], np.cumsum(steps)])
    S = S.copy()
    S[0] = first - first.mean()
    return S


def construct_ks_potential(n: ob.DensityTrajectory, S0=None) -> PotentialTrajectory:
    """Potential driving one doubly-occupied orbital whose density ``2|phi|^2`` is ``n``."""
    half = ob.DensityTrajectory(0.5 * n.values, n.grid, n.times, 1)
    return invert_single_particle_hj(half, S0)


# ---------------------------------------------------------------- Taylor recursion


@dataclass(frozen=True)
class TaylorResult:
    """Coefficients ``v^(k)`` (rows) and the ratio test ``||v^(k)|| / k!``."""

    coefficients: np.ndarray
    scaled_norms: np.ndarray
    balance_residuals: np.ndarray

    @property
    def radius_estimate(self) -> float:
        """Ratio-test estimate of the convergence radius in time."""
        s = self.scaled_norms
        good = s[1:][(s[:-1] > 0) & (s[1:] > 0)]
        prev = s[:-1][(s[:-1] > 0) & (s[1:] > 0)]
        if good.size == 0:
            return np.inf
        return float(np.min(prev / good))


def _bilinear_q(a: np.ndarray, b: np.ndarray, grid: Grid) -> np.ndarray:
    """Symmetric bilinear form whose diagonal is the kinetic part of ``q``."""
    La = gc.apply_laplacian(a, grid, axis=0)
    Lb = gc.apply_laplacian(b, grid, axis=0)
    L2a = gc.apply_laplacian(La, grid, axis=0)
    L2b = gc.apply_laplacian(Lb, grid, axis=0)
    return (0.5 * np.real(np.conj(La) * Lb)
            - 0.25 * np.real(np.conj(a) * L2b + np.conj(b) * L2a))


def _half_product(a: np.ndarray, b: np.ndarray, grid: Grid) -> np.ndarray:
    """Symmetrized ``Re(conj(a[m]) b[m+1])`` at the half points (Dirichlet edges zero)."""
    if grid.periodic:
        return 0.5 * np.real(np.conj(a) * np.roll(b, -1) + np.conj(b) * np.roll(a, -1))
    ap, bp = np.pad(a, 1), np.pad(b, 1)
    return 0.5 * np.real(np.conj(ap[:-1]) * bp[1:] + np.conj(bp[:-1]) * ap[1:])


def invert_taylor_rg(n_coeffs, psi0: WaveFunction, spec: HamiltonianSpec, K: int) -> TaylorResult:
    """Taylor coefficients ``v^(0..K)`` of the potential at ``t = 0``.

    ``n_coeffs[j]`` is the ``j``-th time derivative of the density at ``t = 0``
    (``j = 0..K+2``).  The state derivatives follow from
    ``i psi^(j+1) = H0 psi^(j) + sum_l C(j, l) v^(l) psi^(j-l)`` and at order
    ``k`` the equation
    ``-div(w^(0) grad v^(k)) = q^(k) - n^(k+2) + sum_{l<k} C(k, l) div(w^(k-l) grad v^(l))``
    is solved, where ``w^(j)`` are the Taylor coefficients of the half-grid
    weight ``Re(conj(psi[m]) psi[m+1])``.  Single-particle states only.
    """
    if K > TAYLOR_MAX_ORDER:
        raise ValueError(f"Taylor order limited to {TAYLOR_MAX_ORDER}, got {K}")
    if K < 0:
        raise ValueError("Taylor order must be nonnegative")
    if psi0.rank != 1:
        raise ValueError("the Taylor recursion is implemented for one particle")
    g = spec.grid
    n_coeffs = [np.asarray(g.check(c), dtype=float) for c in n_coeffs]
    if len(n_coeffs) < K + 3:
        raise ValueError(f"need density coefficients up to order {K + 2}")
    dev = float(np.max(np.abs(n_coeffs[0] - ob.density(psi0))))
    if dev > 1e-6:
        raise IncompatibleInitialState(f"n^(0) differs from |psi0|^2 by {dev:.3e}")

    H0 = lambda f: -0.5 * gc.apply_laplacian(f, g)  # noqa: E731
    psis = [np.array(psi0.values)]
    vs: list[np.ndarray] = []
    weights = [_half_product(psis[0], psis[0], g)]
    if np.any(weights[0] <= sl.N_MIN):
        raise DegenerateWeight("initial half-grid weight is degenerate")
    balance = []

    def div_w_grad(w, v):
        return gc.backward_divergence(w * gc.forward_difference(v, g), g)

    for k in range(K + 1):
        # make psi^(k+1) available for the order-k weight and q needs psi^(0..k)
        q_k = sum(comb(k, l) * _bilinear_q(psis[l], psis[k - l], g) for l in range(k + 1))
        rhs = q_k - n_coeffs[k + 2]
        for l in range(k):
            rhs = rhs + comb(k, l) * div_w_grad(weights[k - l], vs[l])
        if g.periodic:
            rhs = rhs - rhs.mean()
        prob = sl.SLProblem(n_coeffs[0], rhs, g, half_weight=weights[0])
        v_k = sl.solve_direct_1d(prob)
        balance.append(sl.residual(prob, v_k))
        vs.append(v_k)
        if k == K:
            break
        # psi^(k+1) from the Leibniz expansion of i psi' = (H0 + v(t)) psi
        acc = H0(psis[k])
        for l in range(k + 1):
            acc = acc + comb(k, l) * vs[l] * psis[k - l]
        psis.append(-1j * acc)
        j = k + 1
        weights.append(sum(comb(j, l) * _half_product(psis[l], psis[j - l], g)
                           for l in range(j + 1)))
    coeffs = np.array(vs)
    scaled = np.array([gc.l2_norm(c, g) / factorial(k) for k, c in enumerate(coeffs)])
    return TaylorResult(coeffs, scaled, np.array(balance))


def density_taylor_coefficients(psi0: WaveFunction, v_func, spec: HamiltonianSpec,
                                order: int, h: float = 1e-2, dt: float | None = None):
    """Time derivatives of the density at ``t = 0`` from forward and backward runs.

    ``psi0`` is propagated under ``v_func(t, x)`` to ``t = +/- p h`` with
    Crank-Nicolson steps of size ``dt`` (default ``h / 20``); central
    finite-difference weights on the ``2p + 1`` samples give the derivatives
    up to ``order``.
    """
    g = spec.grid
    p = order // 2 + 2
    dt = dt or h / 20
    sub = max(1, int(round(h / dt)))
    dt = h / sub
    cn = CrankNicolson(spec)
    samples = {0: ob.density(psi0)}
    for sign in (1, -1):
        psi = np.array(psi0.values)
        t = 0.0
        for j in range(1, p + 1):
            for _ in range(sub):
                vm = v_func(t + sign * 0.5 * dt, g.x)
                psi = cn.step(psi, np.broadcast_to(vm, g.x.shape), sign * dt)
                t += sign * dt
            samples[sign * j] = np.abs(psi) ** 2
    offsets = np.arange(-p, p + 1)
    data = np.array([samples[o] for o in offsets])
    V = np.vander(offsets * h, increasing=True).T     # rows: powers
    out = []
    for d in range(order + 1):
        rhs = np.zeros(len(offsets))
        rhs[d] = factorial(d)
        wts = np.linalg.solve(V, rhs)
        out.append(wts @ data)
    return out
