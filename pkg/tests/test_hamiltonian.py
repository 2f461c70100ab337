import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from densmap import grid as gc
from densmap.errors import WaveFunctionError
from densmap.grid import build_grid
from densmap.hamiltonian import (HamiltonianSpec, SoftCore, assemble, ground_state,
                                 spectrum)
from densmap.wavefunction import SYMMETRIC, WaveFunction, normalize


def test_free_periodic_constant_in_kernel(ring):
    H = assemble(HamiltonianSpec(ring, 0.0))
    assert np.abs(H.apply(np.ones(ring.M, complex))).max() < 1e-12


def test_constant_shift(ring):
    rng = np.random.default_rng(0)
    psi = rng.standard_normal(ring.M) + 1j * rng.standard_normal(ring.M)
    h0 = assemble(HamiltonianSpec(ring, np.cos(ring.x))).apply(psi)
    h1 = assemble(HamiltonianSpec(ring, np.cos(ring.x) + 0.7)).apply(psi)
    assert np.allclose(h1, h0 + 0.7 * psi, atol=1e-12)


def test_softcore_interaction_on_coincident_peaks():
    g = build_grid(10.0, 20, origin=-5.0)
    spec = HamiltonianSpec(g, 0.0, SoftCore(1.0, 1.0), 2)
    i = 10
    psi = np.zeros((20, 20), complex)
    psi[i, i] = 1.0
    Hpsi = assemble(spec).apply(psi)
    kinetic = -0.5 * (-2 / g.dx**2) * 2
    assert (Hpsi[i, i] - kinetic).real == pytest.approx(1.0, rel=1e-12)


def test_softcore_is_even(ring):
    spec = HamiltonianSpec(ring, 0.0, SoftCore(1.0, 1.0), 2)
    w = spec.pair_potential
    assert np.array_equal(w, w.T)


def test_matrix_symmetric(ring):
    for spec in (HamiltonianSpec(ring, np.cos(ring.x)),
                 HamiltonianSpec(build_grid(6.0, 16), np.sin(np.arange(16)), SoftCore(), 2)):
        A = assemble(spec).dense()
        assert np.array_equal(A, A.T)


def test_rank_mismatch_rejected(ring):
    spec = HamiltonianSpec(ring, 0.0, None, 2)
    with pytest.raises(WaveFunctionError):
        assemble(spec).apply(np.ones(ring.M, complex))


def test_box_spectrum():
    g = build_grid(1.0, 199, "dirichlet")
    dec = spectrum(HamiltonianSpec(g, 0.0), 4)
    assert dec.values[0] == pytest.approx(np.pi**2 / 2, rel=1e-3)
    m = np.arange(1, 5)
    assert np.allclose(dec.values / (m**2 * np.pi**2 / 2), 1, rtol=2e-3)


def test_oscillator_spectrum():
    g = build_grid(20.0, 400, origin=-10.0)
    dec = spectrum(HamiltonianSpec(g, g.x**2 / 2), 5)
    assert np.allclose(dec.values, np.arange(5) + 0.5, atol=1e-2)
    assert np.allclose(np.diff(dec.values), 1.0, atol=1e-2)


def test_spectrum_eigenvectors_orthonormal(ring):
    dec = spectrum(HamiltonianSpec(ring, np.cos(ring.x)), 6)
    G = dec.vectors.conj() @ dec.vectors.T * ring.dx
    assert np.allclose(G, np.eye(6), atol=1e-10)
    assert np.all(np.diff(dec.values) >= 0)


def test_spectrum_shift_equivariance(ring):
    a = spectrum(HamiltonianSpec(ring, np.cos(ring.x)), 5)
    b = spectrum(HamiltonianSpec(ring, np.cos(ring.x) + 2.5), 5)
    assert np.allclose(b.values - a.values, 2.5, atol=1e-12)
    assert np.allclose(np.abs(a.vectors), np.abs(b.vectors), atol=1e-9)


def test_spectrum_rejects_large_K(ring):
    with pytest.raises(ValueError):
        spectrum(HamiltonianSpec(ring, 0.0), ring.M + 1)


def test_box_ground_state():
    # sampled sines are exact eigenvectors of the three-point stencil, so the
    # O(dx**2) allowance is met with room to spare
    for M in (49, 99, 199):
        g = build_grid(1.0, M, "dirichlet")
        psi = ground_state(HamiltonianSpec(g, 0.0))
        assert np.abs(psi.values - np.sqrt(2) * np.sin(np.pi * g.x)).max() < g.dx**2


def test_oscillator_ground_state():
    g = build_grid(20.0, 400, origin=-10.0)
    psi = ground_state(HamiltonianSpec(g, g.x**2 / 2))
    ref = np.pi**-0.25 * np.exp(-g.x**2 / 2)
    assert np.abs(psi.values - ref).max() < 1e-3
    assert np.isrealobj(psi.values) or np.abs(psi.values.imag).max() == 0


def test_free_ring_ground_state_constant(ring):
    psi = ground_state(HamiltonianSpec(ring, 0.0))
    assert np.allclose(psi.values, 1 / np.sqrt(ring.L), atol=1e-12)


def test_two_particle_symmetric_ground_state():
    g = build_grid(8.0, 24, origin=-4.0)
    spec = HamiltonianSpec(g, 0.5 * g.x**2, SoftCore(1.0, 1.0), 2)
    psi = ground_state(spec, SYMMETRIC)
    assert psi.symmetry == SYMMETRIC
    assert psi.symmetry_residual() < 1e-12
    assert gc.l2_norm(psi.values, g, 2) == pytest.approx(1.0, abs=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_variational_bound_and_symmetry(seed):
    rng = np.random.default_rng(seed)
    g = build_grid(4.0, 16, "dirichlet")
    spec = HamiltonianSpec(g, rng.standard_normal(16))
    H = assemble(spec)
    phi, chi = rng.standard_normal((2, 16)) + 1j * rng.standard_normal((2, 16))
    lhs = gc.inner(phi, H.apply(chi), g)
    rhs = gc.inner(H.apply(phi), chi, g)
    assert abs(lhs - rhs) <= 1e-10 * max(1.0, abs(lhs))
    psi = normalize(WaveFunction(phi, g))
    e1 = spectrum(spec, 1).values[0]
    assert H.expectation(psi) >= e1 - 1e-10
