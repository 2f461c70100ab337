"""Linear response: Kubo variations, the density response kernel and its Lehmann form.

Conventions
-----------
Transition densities are ``n_0k(x) = N int conj(psi_0(x, xbar)) psi_k(x, xbar) dxbar``
with discretely normalized eigenvectors, so they are densities per unit
length (the grid cell acts as the mollifier).  The frequency kernel is

.. math::

    \\tilde\\chi(\\omega; x, y) = \\sum_{k=1}^{K}
        \\frac{n_{0k}(x) n_{k0}(y)}{\\omega - \\Omega_k + i\\gamma}
      - \\frac{n_{0k}(y) n_{k0}(x)}{\\omega + \\Omega_k + i\\gamma}

and its time-domain counterpart is
``chi(t; x, y) = -i theta(t) sum_k (n_0k(x) n_k0(y) e^{-i W_k t} - c.c.)``.
A potential ``dv(t, y)`` changes the density by
``dn(t, x) = int ds sum_y chi(t - s; x, y) dv(s, y) dx``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import observables as ob
from .errors import GridError, NumericalFailure
from .grid import Grid
from .hamiltonian import HamiltonianSpec, SpectralDecomposition, spectrum
from .propagator import (MIDPOINT, PotentialTrajectory, TimeGrid,
                         Trajectory, functional_derivative_dpsi,
                         propagate_spectral_static, propagate_stepwise_static)
from .wavefunction import WaveFunction

DEFAULT_GAMMA = 0.01
KAPPA_RANGE = (1e-6, 1e-1)


@dataclass(frozen=True, eq=False)
class ResponseKernel:
    """Response kernel on a frequency or time axis.

    ``values`` has shape ``(len(axis), M, M)`` indexed ``[w_or_t, x, y]``;
    ``domain`` is ``"frequency"`` or ``"time"``.
    """

    axis: np.ndarray
    values: np.ndarray
    grid: Grid
    domain: str
    gamma: float | None = None
    excitations: np.ndarray | None = None

    def integrated_magnitude(self) -> np.ndarray:
        """``int int |chi(., x, y)| dx dy`` for every axis point."""
        return np.sum(np.abs(self.values), axis=(1, 2)) * self.grid.dx**2

    def peak(self) -> float:
        """Axis value of the largest integrated magnitude (parabolic refinement)."""
        return float(_refined_peak(self.axis, self.integrated_magnitude()))

    def symmetry_residual(self) -> float:
        """``max |chi(w; x, y) - chi(w; y, x)|`` relative to ``max |chi|``."""
        diff = np.abs(self.values - np.swapaxes(self.values, 1, 2)).max()
        return float(diff / max(np.abs(self.values).max(), np.finfo(float).tiny))


def _refined_peak(axis: np.ndarray, values: np.ndarray) -> float:
    i = int(np.argmax(values))
    if 0 < i < len(values) - 1:
        a, b, c = values[i - 1], values[i], values[i + 1]
        denom = a - 2 * b + c
        if denom != 0:
            shift = 0.5 * (a - c) / denom
            return axis[i] + shift * (axis[i + 1] - axis[i])
    return axis[i]


# ---------------------------------------------------------------- Kubo


def _operator(A, grid: Grid, rank: int):
    """Normalize ``A`` into a callable acting on state arrays.

    Accepted forms: a callable, a one-body multiplication field of shape
    ``(M,)`` (summed over both particles for rank 2) or a matrix acting on
    the flattened state.
    """
    if callable(A):
        return A
    arr = np.asarray(A)
    if arr.ndim == 1:
        grid.check(arr)
        field = arr if rank == 1 else arr[:, None] + arr[None, :]
        return lambda psi: field * psi
    if arr.ndim == 2 and arr.shape[0] == arr.shape[1] == grid.M**rank:
        if not np.allclose(arr, arr.conj().T):
            raise ValueError("observable matrix must be Hermitian")
        return lambda psi: (arr @ psi.ravel()).reshape(psi.shape)
    raise GridError(f"cannot interpret observable of shape {arr.shape}")


def expectation_series(A, traj: Trajectory) -> np.ndarray:
    """``<psi(t), A psi(t)>`` at every node of ``traj``."""
    op = _operator(A, traj.grid, traj.rank)
    w = traj.grid.dx**traj.rank
    return np.array([np.real(np.vdot(s, op(s))) * w for s in traj.states])


def kubo_response(A, psi0: WaveFunction, v: PotentialTrajectory, w: PotentialTrajectory,
                  spec: HamiltonianSpec, sampling: str = MIDPOINT) -> np.ndarray:
    """First-order change ``2 Re <dpsi([v; w], t), A psi([v], t)>`` of ``<A>``."""
    if v.grid != spec.grid or w.grid != spec.grid:
        raise GridError("potentials and Hamiltonian live on different grids")
    traj = propagate_stepwise_static(psi0, v, spec, sampling)
    dpsi = functional_derivative_dpsi(psi0, v, w, spec, sampling, trajectory=traj)
    op = _operator(A, spec.grid, spec.rank)
    wq = spec.grid.dx**spec.rank
    return np.array([2.0 * np.real(np.vdot(d, op(s))) * wq
                     for d, s in zip(dpsi.states, traj.states)])


def finite_difference_response(A, psi0: WaveFunction, v: PotentialTrajectory,
                               w: PotentialTrajectory, spec: HamiltonianSpec,
                               eps: float = 1e-3, sampling: str = MIDPOINT) -> np.ndarray:
    """Oracle ``(<A>[v + eps w] - <A>[v]) / eps`` from two propagations."""
    base = expectation_series(A, propagate_stepwise_static(psi0, v, spec, sampling))
    pert = expectation_series(A, propagate_stepwise_static(psi0, v + w.scaled(eps), spec,
                                                           sampling))
    return (pert - base) / eps


# ---------------------------------------------------------------- Lehmann


def transition_densities(dec: SpectralDecomposition, n_particles: int = 1) -> np.ndarray:
    """``n_0k(x)`` for every stored eigenvector ``k`` (row ``k``)."""
    e0 = np.conj(dec.vectors[0])
    if n_particles == 1:
        return e0[None, :] * dec.vectors
    return 2.0 * np.sum(e0[None] * dec.vectors, axis=2) * dec.grid.dx


def _checked_decomposition(spec: HamiltonianSpec, K: int, dec) -> SpectralDecomposition:
    if K < 1:
        raise ValueError("at least one excited state is required")
    if dec is None:
        dec = spectrum(spec, K + 1)
    if dec.count < K + 1:
        raise ValueError(f"decomposition holds {dec.count} states, need {K + 1}")
    if dec.values[1] - dec.values[0] < 1e-12:
        raise NumericalFailure("ground state is degenerate; the Lehmann sum is undefined")
    return dec


def chi_lehmann(spec: HamiltonianSpec, K: int, gamma: float = DEFAULT_GAMMA,
                omegas=None, decomposition: SpectralDecomposition | None = None,
                n_omega: int = 1501) -> ResponseKernel:
    """Frequency-domain kernel from the ``K`` lowest excitations.

    The default frequency grid spans ``[0, 1.5 W_K]`` with ``n_omega`` points,
    augmented by 41 points spaced ``gamma / 4`` around every excitation so
    that the Lorentzian lines are resolved.
    """
    dec = _checked_decomposition(spec, K, decomposition)
    Omega = dec.values[1:K + 1] - dec.values[0]
    if omegas is None:
        omegas = default_omegas(Omega, gamma, n_omega)
    omegas = np.asarray(omegas, dtype=float)
    nk = transition_densities(dec, spec.n_particles)[1:K + 1]
    M = spec.grid.M
    a = nk[:, :, None] * np.conj(nk)[:, None, :]          # n_0k(x) n_k0(y)
    # resonant and antiresonant poles stacked so one matrix product sums over k
    poles = np.concatenate([1.0 / (omegas[:, None] - Omega[None] + 1j * gamma),
                            -1.0 / (omegas[:, None] + Omega[None] + 1j * gamma)], axis=1)
    amps = np.concatenate([a, np.swapaxes(a, 1, 2)]).reshape(2 * K, M * M)
    chi = (poles @ amps).reshape(len(omegas), M, M)
    return ResponseKernel(omegas, chi, spec.grid, "frequency", gamma, Omega)


def default_omegas(Omega, gamma: float, n_omega: int = 1501) -> np.ndarray:
    """Uniform grid on ``[0, 1.5 max(Omega)]`` refined around each excitation."""
    Omega = np.asarray(Omega, dtype=float)
    coarse = np.linspace(0.0, 1.5 * Omega.max(), n_omega)
    local = (Omega[:, None] + 0.25 * gamma * np.arange(-20, 21)[None, :]).ravel()
    grid = np.union1d(coarse, local[local >= 0])
    return grid[grid <= coarse[-1]]


@dataclass(frozen=True)
class LehmannProfile:
    """Integrated magnitude and one column of the frequency kernel."""

    omegas: np.ndarray
    magnitude: np.ndarray
    column: np.ndarray
    excitations: np.ndarray
    y: int

    def peak(self) -> float:
        return float(_refined_peak(self.omegas, self.magnitude))


def lehmann_profile(spec: HamiltonianSpec, K: int, y: int, gamma: float = DEFAULT_GAMMA,
                    omegas=None, decomposition: SpectralDecomposition | None = None,
                    chunk: int = 128) -> LehmannProfile:
    """Same quantities as :func:`chi_lehmann` without holding the full kernel.

    The frequencies are processed ``chunk`` at a time, so memory stays at
    ``chunk * M**2`` complex numbers.
    """
    dec = _checked_decomposition(spec, K, decomposition)
    Omega = dec.values[1:K + 1] - dec.values[0]
    omegas = default_omegas(Omega, gamma) if omegas is None else np.asarray(omegas, float)
    mags, cols = [], []
    for i in range(0, len(omegas), chunk):
        ker = chi_lehmann(spec, K, gamma, omegas[i:i + chunk], dec)
        mags.append(ker.integrated_magnitude())
        cols.append(ker.values[:, :, y])
    return LehmannProfile(omegas, np.concatenate(mags), np.concatenate(cols), Omega, int(y))


def chi_lehmann_time(spec: HamiltonianSpec, K: int, times, y: int,
                     decomposition: SpectralDecomposition | None = None) -> np.ndarray:
    """``chi(t; x, y)`` for the fixed column ``y`` (shape ``(len(times), M)``)."""
    dec = _checked_decomposition(spec, K, decomposition)
    Omega = dec.values[1:K + 1] - dec.values[0]
    nk = transition_densities(dec, spec.n_particles)[1:K + 1]
    times = np.asarray(times, dtype=float)
    phase = np.exp(-1j * np.outer(times, Omega))                 # (t, k)
    amp = nk * np.conj(nk[:, y])[:, None]                        # (k, x)
    out = 2.0 * np.imag(phase @ amp)
    out[times < 0] = 0.0
    return out


# ---------------------------------------------------------------- kicks


def kick_response(spec: HamiltonianSpec, y, times: TimeGrid, kappa: float = 1e-3,
                  psi0: WaveFunction | None = None, antisymmetric: bool = True,
                  method: str = "cn") -> np.ndarray:
    """Density change per unit kick strength after an impulse at node(s) ``y``.

    The impulse ``kappa delta(t) 1_y(x)`` (unit value at node ``y``) is
    applied as the Crank-Nicolson factor ``(1 - i kappa/2)/(1 + i kappa/2)``
    at ``y``; the state then evolves under the static spec.  ``y`` may be an
    index or a mapping ``{index: weight}``.  With ``antisymmetric`` the
    estimate ``(n[kappa] - n[-kappa]) / (2 kappa)`` removes the even orders
    in ``kappa``.  ``method="spectral"`` replaces the Crank-Nicolson steps by
    exact evolution through the full discrete spectrum.  Returns ``dn(t, x) / kappa`` of shape
    ``(n_nodes, M)``, which equals ``dx * chi(t; x, y)`` to first order.
    """
    lo, hi = KAPPA_RANGE
    if not lo <= abs(kappa) <= hi:
        raise ValueError(f"kick strength must lie in [{lo:g}, {hi:g}], got {kappa}")
    if psi0 is None:
        from .hamiltonian import ground_state
        psi0 = ground_state(spec)
    weights = {int(y): 1.0} if np.isscalar(y) else {int(k): float(w) for k, w in y.items()}
    profile = np.zeros(spec.grid.M)
    for k, w in weights.items():
        profile[k] += w
    if method not in ("cn", "spectral"):
        raise ValueError(f"unknown propagation method {method!r}")
    static = PotentialTrajectory.static(spec.v_static, spec.grid, times)
    dec = spectrum(spec) if method == "spectral" else None
    n0 = ob.density(psi0)

    def run(strength):
        phase = (1 - 0.5j * strength * profile) / (1 + 0.5j * strength * profile)
        if spec.rank == 1:
            kicked = psi0.values * phase
        else:
            kicked = psi0.values * phase[:, None] * phase[None, :]
        start = psi0.with_values(kicked)
        if dec is not None:
            traj = propagate_spectral_static(start, spec, times.times, dec)
        else:
            traj = propagate_stepwise_static(start, static, spec)
        return ob.density_trajectory(traj).values

    if antisymmetric:
        return (run(kappa) - run(-kappa)) / (2.0 * kappa)
    return (run(kappa) - n0) / kappa


def chi_time_domain(spec: HamiltonianSpec, y: int, times: TimeGrid, kappa: float = 1e-3,
                    psi0: WaveFunction | None = None, antisymmetric: bool = True,
                    method: str = "cn") -> ResponseKernel:
    """Column ``y`` of the time-domain kernel from a kick: ``chi(t; x, y) = dn / (kappa dx)``."""
    dn = kick_response(spec, y, times, kappa, psi0, antisymmetric, method) / spec.grid.dx
    vals = np.zeros((times.n_nodes, spec.grid.M, spec.grid.M))
    vals[:, :, y] = dn
    return ResponseKernel(times.times, vals, spec.grid, "time")


def dominant_frequency(series, dt: float, omega_max: float | None = None,
                       pad: int = 16) -> float:
    """Angular frequency of the largest spectral peak of a sampled real series.

    The mean is removed, a Hann window applied and the series zero padded
    by ``pad``; the peak is refined by a parabola through three bins.
    """
    s = np.asarray(series, dtype=float)
    s = (s - s.mean()) * np.hanning(s.size)
    nfft = int(pad * s.size)
    spec = np.abs(np.fft.rfft(s, nfft))
    omegas = 2 * np.pi * np.fft.rfftfreq(nfft, dt)
    mask = omegas > 0
    if omega_max is not None:
        mask &= omegas <= omega_max
    idx = np.flatnonzero(mask)
    if idx.size < 3:
        raise ValueError("frequency window too narrow for the series")
    return float(_refined_peak(omegas[idx], spec[idx]))


def parity(field, tol: float = 1e-8) -> str:
    """``"even"``, ``"odd"`` or ``"mixed"`` under reflection of the grid."""
    f = np.asarray(field, dtype=float)
    scale = max(np.abs(f).max(), np.finfo(float).tiny)
    if np.abs(f - f[::-1]).max() <= tol * scale:
        return "even"
    if np.abs(f + f[::-1]).max() <= tol * scale:
        return "odd"
    return "mixed"
