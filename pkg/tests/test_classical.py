import csv
import math

import numpy as np
import pytest

from qfieldlab.classical import (FieldModel, FieldState, IntegrationError, LatticeSpec, NoiseSpec,
                                 classical_energy, evolve, force, integrate_with_sources,
                                 lattice_frequency, leapfrog_step, make_initial_state,
                                 plane_wave_energy, reversed_replay, sample_noise_block,
                                 write_trajectory_csv)


def _energy_numeric_gradient(state, model, h=1e-6):
    """-(1/a) dE/dphi by central differences."""
    g = np.zeros_like(state.phi)
    for j in range(state.components):
        for x in range(state.sites):
            up, dn = state.phi.copy(), state.phi.copy()
            up[j, x] += h
            dn[j, x] -= h
            e_up = classical_energy(FieldState(up, state.pi, state.twist), model)
            e_dn = classical_energy(FieldState(dn, state.pi, state.twist), model)
            g[j, x] = -(e_up - e_dn) / (2 * h) / model.lattice.spacing
    return g


def test_vacuum_energy_zero():
    model = FieldModel((1.0, 2.0), LatticeSpec(8, 0.5), "phi4", 0.3)
    assert classical_energy(make_initial_state("vacuum", model), model) == 0.0


def test_uniform_field_energy():
    model = FieldModel((1.0,), LatticeSpec(4, 1.0))
    state = FieldState(np.full((1, 4), 2.0), np.zeros((1, 4)))
    assert classical_energy(state, model) == 8.0


def test_phi4_uniform_energy():
    # two components, uniform: a L [m^2 phi^2/2 summed + lambda/4 (sum phi^2)^2]
    model = FieldModel((1.0, 0.5), LatticeSpec(5, 0.2), "phi4", 0.8)
    phi = np.array([[0.3] * 5, [-0.7] * 5])
    e = classical_energy(FieldState(phi, np.zeros_like(phi)), model)
    s = 0.3**2 + 0.7**2
    expect = 1.0 * (0.5 * 0.3**2 + 0.5 * 0.25 * 0.7**2 + 0.25 * 0.8 * s**2)
    assert math.isclose(e, expect, rel_tol=1e-13)


def test_sine_gordon_potential_periodic():
    model = FieldModel((1.3,), LatticeSpec(3, 1.0), "sine-gordon", 0.7)
    period = model.sg_period()
    phi = np.full((1, 3), period)
    # one full period of the potential costs nothing; the mass term is part of it
    assert abs(classical_energy(FieldState(phi, np.zeros((1, 3))), model)) < 1e-12


@pytest.mark.parametrize("potential,coupling", [("free", 0.0), ("phi4", 0.5), ("sine-gordon", 0.4)])
def test_force_is_energy_gradient(potential, coupling, rng):
    model = FieldModel((1.0, 0.7), LatticeSpec(6, 0.4), potential, coupling)
    phi = rng.standard_normal((2, 6))
    state = FieldState(phi, rng.standard_normal((2, 6)), twist=[0.0, 1.5])
    got = force(state.phi, state.twist, model)
    assert np.allclose(got, _energy_numeric_gradient(state, model), atol=1e-6)


def test_kink_energy_close_to_soliton_mass():
    m, lam, a = 1.0, 1.0, 0.05
    lat = LatticeSpec(int(round(30 / a)), a)
    model = FieldModel((m,), lat, "sine-gordon", lam)
    e = classical_energy(make_initial_state("kink", model), model)
    assert abs(e - 8 * m**3 / lam) / (8 * m**3 / lam) < 0.01


@pytest.mark.parametrize("k_index,amp", [(1, 0.3), (3, 1.7)])
def test_plane_wave_energy_closed_form(k_index, amp):
    lat = LatticeSpec(16, 0.3)
    model = FieldModel((0.8,), lat)
    k = 2 * np.pi * k_index / lat.length
    state = make_initial_state("plane-wave", model, k=k, amplitude=amp)
    assert math.isclose(classical_energy(state, model), plane_wave_energy(model, k, amp), rel_tol=1e-10)


def test_plane_wave_travels_at_lattice_frequency():
    lat = LatticeSpec(16, 0.5)
    model = FieldModel((0.6,), lat)
    k = 2 * np.pi * 2 / lat.length
    w = lattice_frequency(0.6, k, 0.5)
    state = make_initial_state("plane-wave", model, k=k, amplitude=1.0)
    dt, steps = 1e-3, 2000
    final, _ = evolve(state, model, dt, steps)
    t = dt * steps
    assert np.allclose(final.phi[0], np.cos(k * lat.positions - w * t), atol=1e-5)


def test_harmonic_mode_exact_leapfrog_phase():
    # uniform mode on L=2 is a harmonic oscillator of frequency m; velocity
    # Verlet with pi0 = 0 gives phi_n = phi0 cos(n theta), cos(theta) = 1 - (m dt)^2/2
    m, dt, n = 1.3, 0.05, 400
    model = FieldModel((m,), LatticeSpec(2, 1.0))
    state = FieldState(np.full((1, 2), 0.7), np.zeros((1, 2)))
    final, _ = evolve(state, model, dt, n)
    theta = math.acos(1 - (m * dt) ** 2 / 2)
    assert np.allclose(final.phi, 0.7 * math.cos(n * theta), atol=1e-12)
    # and one continuum period returns close to the start
    period_steps = int(round(2 * np.pi / m / dt))
    back, _ = evolve(state, model, 2 * np.pi / m / period_steps, period_steps)
    assert np.allclose(back.phi, 0.7, atol=1e-3)


def _kink_setup(a=0.1, half_width=12.0):
    lat = LatticeSpec(int(round(2 * half_width / a)), a)
    model = FieldModel((1.0,), lat, "sine-gordon", 1.0)
    return model, make_initial_state("kink", model)


def test_kink_energy_drift_long_run():
    model, kink = _kink_setup()
    # a moving kink exercises the dynamics; boost it with a small momentum
    phi = kink.phi
    pi = -0.3 * np.gradient(phi[0], model.lattice.spacing)[None, :]
    state = FieldState(phi, pi, kink.twist)
    e0 = classical_energy(state, model)
    final, rec = evolve(state, model, 0.01, 100_000, record_every=10_000)
    drift = max(abs(classical_energy(s, model) - e0) for s in rec + [final]) / e0
    assert drift <= 1e-4


def test_kink_is_stationary():
    model, kink = _kink_setup(a=0.05)
    final, _ = evolve(kink, model, 0.005, 10_000)
    assert np.abs(final.phi - kink.phi).max() <= 1e-3


def test_energy_error_scales_as_dt_squared(rng):
    model = FieldModel((1.0,), LatticeSpec(32, 0.5), "phi4", 0.5)
    state = make_initial_state("gaussian-random", model, sigma=0.5, seed=3)
    e0 = classical_energy(state, model)

    def max_dev(dt):
        steps = int(round(4.0 / dt))
        _, rec = evolve(state, model, dt, steps, record_every=1)
        return max(abs(classical_energy(s, model) - e0) for s in rec)

    ratio = max_dev(0.04) / max_dev(0.02)
    assert ratio >= 3.5


@pytest.mark.parametrize("potential", ["free", "phi4", "sine-gordon"])
def test_time_reversibility(potential):
    model = FieldModel((1.0,), LatticeSpec(16, 0.5), potential, 0.5)
    state = make_initial_state("gaussian-random", model, sigma=0.4, seed=11)
    fwd, _ = evolve(state, model, 0.02, 2000)
    back, _ = evolve(fwd.time_reversed(), model, 0.02, 2000)
    back = back.time_reversed()
    assert np.abs(back.phi - state.phi).max() <= 1e-9
    assert np.abs(back.pi - state.pi).max() <= 1e-9


def test_leapfrog_step_matches_evolve():
    model = FieldModel((1.0,), LatticeSpec(8, 1.0), "phi4", 0.2)
    state = make_initial_state("gaussian-random", model, sigma=1.0, seed=0)
    assert leapfrog_step(state, model, 0.1) == evolve(state, model, 0.1, 1)[0]


def test_blow_up_raises_integration_error():
    model = FieldModel((1.0,), LatticeSpec(4, 1.0), "phi4", 1.0)
    state = FieldState(np.full((1, 4), 50.0), np.zeros((1, 4)))
    with pytest.raises(IntegrationError):
        evolve(state, model, 1.0, 50)


def test_state_validation():
    with pytest.raises(ValueError):
        FieldState(np.zeros((1, 3)), np.zeros((1, 4)))
    with pytest.raises(ValueError):
        FieldState(np.array([[np.nan, 0.0]]), np.zeros((1, 2)))
    s = FieldState(np.zeros((1, 3)), np.zeros((1, 3)))
    with pytest.raises(ValueError):
        s.phi[0, 0] = 1.0
    with pytest.raises(ValueError):
        FieldModel((1.0,), LatticeSpec(4), "quartic")
    with pytest.raises(ValueError):
        LatticeSpec(1)


def test_noise_variance_and_covariance():
    sigma = np.array([[2.0, 0.6], [0.6, 0.5]])
    lat = LatticeSpec(100, 0.5)
    dt = 0.1
    block = sample_noise_block(NoiseSpec(sigma, seed=4), lat, 10_000, dt)  # 1e6 draws per component
    v = block.values.transpose(1, 0, 2).reshape(2, -1) * np.sqrt(lat.spacing * dt)
    cov = np.cov(v)
    # standard error of a variance estimate is about sqrt(2/N) * sigma^2
    assert np.allclose(cov, sigma, atol=5 * np.sqrt(2 / v.shape[1]) * 2.0)
    assert abs(v.mean(axis=1)).max() < 5 * np.sqrt(2.0 / v.shape[1])


def test_noise_spec_validation():
    with pytest.raises(ValueError):
        NoiseSpec([[1.0, 2.0], [2.0, 1.0]])  # not PSD
    with pytest.raises(ValueError):
        NoiseSpec([[1.0, 0.1], [0.2, 1.0]])  # not symmetric
    with pytest.raises(ValueError):
        NoiseSpec([[1.0]], driven=(0, 1))


def test_noise_determinism():
    lat = LatticeSpec(8, 1.0)
    b1 = sample_noise_block(NoiseSpec([[1.0]], seed=9), lat, 50, 0.1)
    b2 = sample_noise_block(NoiseSpec([[1.0]], seed=9), lat, 50, 0.1)
    b3 = sample_noise_block(NoiseSpec([[1.0]], seed=10), lat, 50, 0.1)
    assert np.array_equal(b1.values, b2.values)
    assert not np.array_equal(b1.values, b3.values)


def test_zero_noise_is_bitwise_deterministic():
    model = FieldModel((1.0,), LatticeSpec(16, 0.5), "phi4", 0.3)
    state = make_initial_state("gaussian-random", model, sigma=0.5, seed=2)
    block = sample_noise_block(NoiseSpec([[0.0]], seed=1), model.lattice, 300, 0.05)
    traj = integrate_with_sources(state, model, block, 0.05, record_every=0)
    det, _ = evolve(state, model, 0.05, 300)
    assert traj[-1] == det


def test_noise_drives_only_listed_component():
    model = FieldModel((1.0, 1.0), LatticeSpec(8, 1.0))
    vac = make_initial_state("vacuum", model)
    block = sample_noise_block(NoiseSpec([[1.0]], seed=0, driven=(1,)), model.lattice, 20, 0.1)
    final = integrate_with_sources(vac, model, block, 0.1, record_every=0)[-1]
    assert np.all(final.phi[0] == 0) and np.any(final.phi[1] != 0)


def test_reversed_replay_recovers_initial_state():
    model = FieldModel((0.5,), LatticeSpec(16, 1.0), "phi4", 0.2)
    state = make_initial_state("gaussian-random", model, sigma=0.3, seed=5)
    block = sample_noise_block(NoiseSpec([[0.4]], seed=6), model.lattice, 500, 0.05)
    final = integrate_with_sources(state, model, block, 0.05, record_every=0)[-1]
    back = reversed_replay(final, model, block, 0.05)
    assert np.abs(back.phi - state.phi).max() <= 1e-8
    assert np.abs(back.pi - state.pi).max() <= 1e-8


def test_noise_block_dt_mismatch():
    model = FieldModel((1.0,), LatticeSpec(4, 1.0))
    block = sample_noise_block(NoiseSpec([[1.0]]), model.lattice, 5, 0.1)
    with pytest.raises(ValueError):
        integrate_with_sources(make_initial_state("vacuum", model), model, block, 0.2)


def test_trajectory_csv(tmp_path):
    model = FieldModel((1.0,), LatticeSpec(3, 1.0))
    state = make_initial_state("gaussian-random", model, sigma=1.0, seed=0)
    _, rec = evolve(state, model, 0.1, 4, record_every=2)
    path = tmp_path / "traj.csv"
    write_trajectory_csv(path, rec, 0.1, steps=[0, 2, 4])
    rows = list(csv.DictReader(open(path)))
    assert len(rows) == 3 * 3
    assert float(rows[0]["phi"]) == state.phi[0, 0]
    assert rows[-1]["step"] == "4"
    summ = tmp_path / "energy.csv"
    write_trajectory_csv(summ, rec, 0.1, steps=[0, 2, 4], model=model, summary=True)
    rows = list(csv.DictReader(open(summ)))
    assert float(rows[0]["energy"]) == classical_energy(state, model)
