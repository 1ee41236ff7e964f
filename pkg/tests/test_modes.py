import numpy as np
import pytest

from qfieldlab.classical import FieldModel, FieldState, LatticeSpec, classical_energy, make_initial_state
from qfieldlab.modes import (ModeAmplitudes, ModeBasis, alpha_of, amplitudes_to_field,
                             field_to_amplitudes, signed_wavenumber, state_from_alpha)


def _direct_amplitudes(state, basis):
    """theta and tau by an explicit Fourier sum."""
    L, a = basis.lattice.sites, basis.lattice.spacing
    y = basis.lattice.positions
    p = basis.momenta()
    w = basis.frequencies_full()
    theta = np.zeros((state.components, L), dtype=complex)
    tau = np.zeros_like(theta)
    for j in range(state.components):
        for k in range(L):
            phase = np.exp(-1j * p[k] * y)
            phi_t = a / np.sqrt(L * a) * np.sum(phase * state.phi[j])
            pi_t = a / np.sqrt(L * a) * np.sum(phase * state.pi[j])
            theta[j, k] = np.sqrt(w[j, k]) * phi_t
            tau[j, k] = pi_t / np.sqrt(w[j, k])
    return theta, tau


def test_signed_wavenumber():
    assert [signed_wavenumber(k, 8) for k in range(8)] == [0, 1, 2, 3, 4, -3, -2, -1]
    assert [signed_wavenumber(k, 5) for k in range(5)] == [0, 1, 2, -2, -1]


def test_lowest_selection_is_closed():
    basis = ModeBasis.lowest(LatticeSpec(8, 1.0), (1.0,), 4, count=3)
    assert set(basis.modes) == {(0, 0), (0, 1), (0, -1)}
    two = ModeBasis.lowest(LatticeSpec(8, 1.0), (1.0, 2.0), 4, count=4)
    assert set(two.modes) == {(0, 0), (1, 0), (0, 1), (0, -1)}
    with pytest.raises(ValueError):
        ModeBasis.lowest(LatticeSpec(8, 1.0), (1.0,), 4, count=2)
    with pytest.raises(ValueError):
        ModeBasis(LatticeSpec(8, 1.0), (1.0,), ((0, 1),), 4)


def test_massless_zero_mode_rejected():
    with pytest.raises(ValueError):
        ModeBasis.lowest(LatticeSpec(4, 1.0), (0.0,), 4, count=1)


def test_transform_matches_direct_sum(rng):
    lat = LatticeSpec(6, 0.7)
    basis = ModeBasis.lowest(lat, (1.0, 0.4), 3, count=4)
    state = FieldState(rng.standard_normal((2, 6)), rng.standard_normal((2, 6)))
    amps = field_to_amplitudes(state, basis)
    theta, tau = _direct_amplitudes(state, basis)
    assert np.allclose(amps.theta, theta) and np.allclose(amps.tau, tau)


def test_roundtrip_full_basis(rng):
    lat = LatticeSpec(3, 1.0)
    basis = ModeBasis.lowest(lat, (0.5,), 5)
    state = FieldState(rng.standard_normal((1, 3)), rng.standard_normal((1, 3)))
    back = amplitudes_to_field(field_to_amplitudes(state, basis), basis)
    assert np.allclose(back.phi, state.phi, atol=1e-13) and np.allclose(back.pi, state.pi, atol=1e-13)
    assert basis.outside_weight(state) < 1e-14


def test_roundtrip_selected_modes(rng):
    lat = LatticeSpec(8, 0.5)
    basis = ModeBasis.lowest(lat, (1.0,), 5, count=5)
    alpha = rng.standard_normal(5) + 1j * rng.standard_normal(5)
    state = state_from_alpha(alpha, basis)
    assert np.allclose(alpha_of(state, basis), alpha)
    assert basis.outside_weight(state) < 1e-14


def test_projection_removes_outside_modes(rng):
    lat = LatticeSpec(8, 1.0)
    basis = ModeBasis.lowest(lat, (1.0,), 5, count=3)
    state = FieldState(rng.standard_normal((1, 8)), rng.standard_normal((1, 8)))
    assert basis.outside_weight(state) > 0.1
    proj = basis.project(state)
    assert basis.outside_weight(proj) < 1e-14
    assert np.allclose(alpha_of(proj, basis), alpha_of(state, basis))


def test_free_energy_is_sum_w_alpha_squared(rng):
    # Parseval with the lattice dispersion: H_free(S) = sum_p w |alpha|^2 over all modes
    lat = LatticeSpec(8, 0.3)
    model = FieldModel((0.9,), lat)
    basis = ModeBasis.lowest(lat, (0.9,), 2, count=8)
    state = FieldState(rng.standard_normal((1, 8)), rng.standard_normal((1, 8)))
    amps = field_to_amplitudes(state, basis)
    quantum = np.sum(basis.frequencies_full() * np.abs(amps.alpha) ** 2)
    assert np.isclose(classical_energy(state, model), quantum, rtol=1e-12)


def test_plane_wave_amplitude_in_single_mode():
    lat = LatticeSpec(8, 1.0)
    model = FieldModel((1.0,), lat)
    basis = ModeBasis.lowest(lat, (1.0,), 5, count=3)
    k = 2 * np.pi / lat.length
    wave = make_initial_state("plane-wave", model, k=k, amplitude=0.5)
    alpha = alpha_of(wave, basis)
    # a right-moving wave occupies +k only
    assert abs(alpha[basis.modes.index((0, -1))]) < 1e-14
    assert abs(alpha[basis.modes.index((0, 0))]) < 1e-14
    assert abs(alpha[basis.modes.index((0, 1))]) > 0.1


def test_reality_violation_rejected():
    lat = LatticeSpec(4, 1.0)
    basis = ModeBasis.lowest(lat, (1.0,), 3, count=3)
    theta = np.zeros((1, 4), dtype=complex)
    theta[0, 1] = 1.0  # no partner at -k
    with pytest.raises(ValueError):
        amplitudes_to_field(ModeAmplitudes(theta, np.zeros_like(theta)), basis)


def test_twisted_state_rejected():
    lat = LatticeSpec(20, 0.5)
    model = FieldModel((1.0,), lat, "sine-gordon", 1.0)
    basis = ModeBasis.lowest(lat, (1.0,), 3, count=3)
    with pytest.raises(ValueError):
        field_to_amplitudes(make_initial_state("kink", model), basis)


def test_continuum_dispersion_option():
    lat = LatticeSpec(8, 0.5)
    b = ModeBasis.lowest(lat, (1.0,), 3, count=3, dispersion="continuum")
    p = 2 * np.pi / lat.length
    assert np.isclose(b.frequencies[b.modes.index((0, 1))], np.sqrt(1 + p * p))
