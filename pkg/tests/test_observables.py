import numpy as np
import pytest

from densmap import grid as gc
from densmap import observables as ob
from densmap.errors import GridError
from densmap.grid import build_grid
from densmap.hamiltonian import HamiltonianSpec, SoftCore, ground_state
from densmap.propagator import PotentialTrajectory, TimeGrid, propagate_stepwise_static
from densmap.wavefunction import SYMMETRIC, WaveFunction, normalize


def oscillator(M, L=20.0):
    g = build_grid(L, M, origin=-L / 2)
    spec = HamiltonianSpec(g, g.x**2 / 2)
    return g, spec, ground_state(spec)


def stationary_residual(M):
    g, spec, psi = oscillator(M)
    n = ob.density(psi)
    q = ob.internal_force_q(psi, spec)
    return gc.l2_norm(q + ob.force_divergence(n, spec.v_static, g), g)


def dipole_force_gap(M, n_steps):
    g = build_grid(16.0, M, "dirichlet", origin=-8.0)
    spec = HamiltonianSpec(g, g.x**2 / 2)
    v = PotentialTrajectory.from_function(lambda t, x: x**2 / 2 + 0.5 * np.sin(2 * t) * x, g,
                                          TimeGrid(2.0, n_steps))
    tr = propagate_stepwise_static(ground_state(spec), v, spec)
    return ob.global_force_balance(tr, v).max_gap


def test_density_of_constant(ring):
    psi = normalize(WaveFunction(np.ones(ring.M, complex), ring))
    assert np.allclose(ob.density(psi), 1 / ring.L, atol=1e-15)


def test_density_of_box_ground_state(box):
    psi = ground_state(HamiltonianSpec(box, 0.0))
    assert np.abs(ob.density(psi) - 2 * np.sin(np.pi * box.x) ** 2).max() < box.dx**2


def test_density_integrates_to_particle_number(ring):
    spec = HamiltonianSpec(build_grid(2 * np.pi, 24), 0.0, SoftCore(), 2)
    psi = ground_state(spec, SYMMETRIC)
    assert gc.integrate(ob.density(psi), spec.grid) == pytest.approx(2.0, abs=1e-10)


def test_current_of_real_state_vanishes(cos_system):
    _, psi = cos_system
    assert np.abs(ob.current(psi)).max() == 0.0


def test_current_of_plane_wave(ring):
    k = 3
    psi = WaveFunction(np.exp(1j * k * ring.x) / np.sqrt(ring.L), ring)
    J = ob.current(psi)
    assert np.allclose(J, np.sin(k * ring.dx) / (ring.dx * ring.L), atol=1e-14)


def test_eigenstate_current_divergence_vanishes(cos_system):
    spec, psi = cos_system
    rotated = psi.with_values(psi.values * np.exp(0.7j))
    assert np.abs(ob.current_divergence(ob.current(rotated), spec.grid)).max() < 1e-12


def test_dirichlet_current_has_zero_boundary_entries(box):
    psi = normalize(WaveFunction(np.sin(np.pi * box.x) * np.exp(2j * box.x), box))
    J = ob.current(psi)
    assert J.shape == (box.M + 1,)
    assert J[0] == 0.0 and J[-1] == 0.0


def test_q_vanishes_for_plane_wave(ring):
    # the two terms are each k_d**4 / (2 L); they cancel to round-off amplified by dx**-4
    k = 3
    psi = WaveFunction(np.exp(1j * k * ring.x) / np.sqrt(ring.L), ring)
    q = ob.internal_force_q(psi, HamiltonianSpec(ring, 0.0))
    kd2 = (2 / ring.dx**2) * (1 - np.cos(k * ring.dx))
    scale = 0.5 * kd2**2 / ring.L
    assert np.abs(q).max() <= 1e-12 * scale


def test_q_stationary_identity_second_order():
    r = [stationary_residual(M) for M in (128, 256, 512)]
    assert r[0] / r[1] == pytest.approx(4, rel=0.1)
    assert r[1] / r[2] == pytest.approx(4, rel=0.1)


def test_q_integrates_to_zero_on_ring(cos_system):
    spec, psi = cos_system
    driven = psi.with_values(psi.values * np.exp(1j * np.sin(spec.grid.x)))
    assert abs(gc.integrate(ob.internal_force_q(driven, spec), spec.grid)) <= 1e-8


def test_q_integrates_to_zero_for_interacting_pair():
    g = build_grid(2 * np.pi, 24)
    spec = HamiltonianSpec(g, np.cos(g.x), SoftCore(1.0, 1.0), 2)
    psi = ground_state(spec, SYMMETRIC)
    psi = psi.with_values(psi.values * np.exp(1j * (np.sin(g.x)[:, None] + np.sin(g.x)[None])))
    assert abs(gc.integrate(ob.internal_force_q(psi, spec), g)) <= 1e-8


def test_q_stationary_identity_for_interacting_pair():
    r = []
    for M in (24, 48, 96):
        g = build_grid(16.0, M, origin=-8.0)
        spec = HamiltonianSpec(g, g.x**2 / 2, SoftCore(1.0, 1.0), 2)
        psi = ground_state(spec, SYMMETRIC)
        q = ob.internal_force_q(psi, spec)
        r.append(gc.l2_norm(q + ob.force_divergence(ob.density(psi), spec.v_static, g), g))
    assert r[0] / r[1] > 3.3
    assert r[1] / r[2] > 3.6


def test_continuity_is_exact(cos_system):
    spec, psi0 = cos_system
    v = PotentialTrajectory.from_function(lambda t, x: np.cos(x) + 0.3 * np.sin(t) * np.sin(x),
                                          spec.grid, TimeGrid(1.0, 200))
    tr = propagate_stepwise_static(psi0, v, spec)
    assert np.abs(ob.continuity_residuals(tr)).max() <= 1e-10


def test_continuity_is_exact_on_box(box):
    spec = HamiltonianSpec(box, 0.0)
    psi0 = ground_state(spec)
    v = PotentialTrajectory.from_function(lambda t, x: 20 * np.sin(5 * t) * x, box,
                                          TimeGrid(0.5, 100))
    tr = propagate_stepwise_static(psi0, v, spec)
    assert np.abs(ob.continuity_residuals(tr)).max() <= 1e-10 * 1e2


def test_dtt_of_constant_density(ring):
    n = ob.DensityTrajectory(np.full((10, ring.M), 1 / ring.L), ring, np.linspace(0, 1, 10))
    assert np.abs(ob.dtt_density(n)).max() < 1e-9


def test_dtt_of_oscillating_density(ring):
    omega = 2.0
    n0 = (1 + 0.5 * np.cos(ring.x)) / ring.L
    errs = []
    for N in (40, 80):
        t = np.linspace(0, 1, N + 1)
        vals = n0 * (1 + 0.1 * np.cos(omega * t))[:, None]
        d = ob.dtt_density(ob.DensityTrajectory(vals, ring, t))
        exact = -0.1 * omega**2 * np.cos(omega * t)[:, None] * n0
        errs.append(np.abs(d - exact)[2:-2].max())
    assert errs[0] < 1e-5
    assert errs[0] / errs[1] == pytest.approx(16, rel=0.15)


def test_dt_density_fourth_order_everywhere(ring):
    n0 = (1 + 0.5 * np.cos(ring.x)) / ring.L
    errs = []
    for N in (40, 80):
        t = np.linspace(0, 1, N + 1)
        vals = n0 * (1 + 0.1 * np.sin(3 * t))[:, None]
        d = ob.dt_density(ob.DensityTrajectory(vals, ring, t))
        exact = 0.3 * np.cos(3 * t)[:, None] * n0
        errs.append(np.abs(d - exact).max())
    assert errs[0] / errs[1] == pytest.approx(16, rel=0.2)


def test_dtt_needs_five_nodes(ring):
    n = ob.DensityTrajectory(np.ones((4, ring.M)), ring, np.linspace(0, 1, 4))
    with pytest.raises(ValueError):
        ob.dtt_density(n)


def test_density_trajectory_shape_checked(ring):
    with pytest.raises(GridError):
        ob.DensityTrajectory(np.ones((4, ring.M + 1)), ring, np.linspace(0, 1, 4))


def test_density_trajectory_invariants(ring):
    good = ob.DensityTrajectory(np.full((5, ring.M), 1 / ring.L), ring, np.linspace(0, 1, 5))
    assert good.invariant_violations() == []
    bad = ob.DensityTrajectory(np.full((5, ring.M), -1.0), ring, np.linspace(0, 1, 5))
    assert len(bad.invariant_violations()) == 2


def test_force_balance_constant_potential(cos_system):
    spec, psi0 = cos_system
    v = PotentialTrajectory.static(np.full(spec.grid.M, 0.4), spec.grid, TimeGrid(0.5, 20))
    fb = ob.global_force_balance(propagate_stepwise_static(psi0, v, spec), v)
    assert np.abs(fb.F_pot).max() < 1e-15
    assert fb.flagged


def test_dipole_force_on_box(box):
    spec = HamiltonianSpec(box, 0.0)
    E = lambda t: 0.5 * np.sin(3 * t)  # noqa: E731
    v = PotentialTrajectory.from_function(lambda t, x: x * E(t), box, TimeGrid(1.0, 100))
    fb = ob.global_force_balance(propagate_stepwise_static(ground_state(spec), v, spec), v)
    assert not fb.flagged
    assert np.allclose(fb.F_pot, -E(fb.times), atol=1e-3)


def test_driven_oscillator_force_balance_second_order():
    gaps = [dipole_force_gap(M, N) for M, N in ((63, 100), (127, 200), (255, 400))]
    assert gaps[0] / gaps[1] == pytest.approx(4, rel=0.1)
    assert gaps[1] / gaps[2] == pytest.approx(4, rel=0.1)


def test_weight_diagnostics_uniform(ring):
    r = ob.weight_diagnostics(np.full(ring.M, 1 / ring.L), ring, 1.0)
    assert r.inverse_power_integral == pytest.approx(ring.L**2, rel=1e-13)
    assert r.weizsacker == pytest.approx(0.0, abs=1e-20)
    assert not r.refinement_unstable


def test_weight_diagnostics_box_is_refinement_unstable(box):
    psi = ground_state(HamiltonianSpec(box, 0.0))
    r = ob.weight_diagnostics(ob.density(psi), box, 1.0, psi)
    assert np.isfinite(r.inverse_power_integral)
    assert r.refinement_unstable
    assert r.weizsacker_bound_ok


def test_weizsacker_of_gaussian():
    g = build_grid(20.0, 400, origin=-10.0)
    n = np.exp(-g.x**2) / np.sqrt(np.pi)
    r = ob.weight_diagnostics(n, g, 1.0)
    # 1/4 int (n')^2 / n = int x^2 n = 1/2 for this density
    assert r.weizsacker == pytest.approx(0.5, abs=g.dx**2)


def test_weight_diagnostics_force_integral(ring):
    n = np.full(ring.M, 1 / ring.L)
    r = ob.weight_diagnostics(n, ring, 1.0, dtj=np.full(ring.M, 0.1))
    assert r.finite_force == pytest.approx(0.01 * ring.L**2, rel=1e-12)


def test_weight_diagnostics_rejects_small_exponent(ring):
    with pytest.raises(ValueError):
        ob.weight_diagnostics(np.ones(ring.M), ring, 0.5)
