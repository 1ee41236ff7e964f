import itertools

import numpy as np
import pytest

from qfieldlab.mrf import (MPModel, MRFModel, config_index, decode_index, empirical_marginals,
                           mp_exact, mp_realizability_search, mp_sample, mp_sample_many,
                           mrf_exact, mrf_gibbs_run, mrf_gibbs_sample, single_site_conditional,
                           symmetric_binary_mp, time_reflection_report, total_variation)


def _brute_mrf(nx, nt, q, psi, psi_t, start=None, end=None):
    """Unnormalized weight of every configuration by explicit edge products."""
    probs = {}
    for flat in itertools.product(range(q), repeat=nx * nt):
        s = np.array(flat).reshape(nx, nt)
        if start is not None and not np.array_equal(s[:, 0], start):
            continue
        if end is not None and not np.array_equal(s[:, -1], end):
            continue
        w = 1.0
        pairs = {(x, (x + 1) % nx) for x in range(nx)} if nx > 2 else ({(0, 1)} if nx == 2 else set())
        for t in range(nt):
            for x, y in pairs:
                w *= psi[s[x, t], s[y, t]]
        for t in range(nt - 1):
            for x in range(nx):
                w *= psi_t[s[x, t], s[x, t + 1]]
        probs[int(config_index(s[None], q)[0])] = w
    z = sum(probs.values())
    return {k: v / z for k, v in probs.items()}


def _as_dict(joint):
    return dict(zip(joint.indices.tolist(), joint.probs))


def test_index_roundtrip(rng):
    configs = rng.integers(0, 3, size=(20, 2, 4))
    idx = config_index(configs, 3)
    assert np.array_equal(decode_index(idx, 3, 2, 4), configs)
    one = np.zeros((1, 2, 2), dtype=int)
    one[0, 1, 0] = 1  # C-order position 2
    assert config_index(one, 2)[0] == 4


@pytest.mark.parametrize("nx,nt,q", [(1, 3, 2), (2, 2, 3), (3, 3, 2)])
def test_exact_matches_brute_force(nx, nt, q, rng):
    psi = np.exp(rng.standard_normal((q, q)))
    psi = psi + psi.T
    psi_t = np.exp(rng.standard_normal((q, q)))  # need not be symmetric
    model = MRFModel(nx, nt, q, psi, psi_t)
    got = _as_dict(mrf_exact(model))
    ref = _brute_mrf(nx, nt, q, psi, psi_t)
    assert got.keys() == ref.keys()
    assert max(abs(got[k] - ref[k]) for k in ref) < 1e-13
    assert abs(sum(got.values()) - 1) < 1e-13


def test_exact_with_clamps():
    psi = np.exp(0.7 * np.eye(2))
    model = MRFModel(3, 3, 2, psi, boundary_start=[0, 1, 0], boundary_end=[1, 1, 0])
    got = _as_dict(mrf_exact(model))
    ref = _brute_mrf(3, 3, 2, psi, psi, start=[0, 1, 0], end=[1, 1, 0])
    assert got.keys() == ref.keys() and len(ref) == 2**3
    assert max(abs(got[k] - ref[k]) for k in ref) < 1e-13


def test_single_free_site_conditional():
    psi = np.array([[2.0, 0.5], [0.5, 1.5]])
    model = MRFModel(3, 3, 2, psi, boundary_start=[0, 1, 1], boundary_end=[1, 0, 1])
    states = np.array([[0, 1, 1], [1, 0, 0], [1, 1, 1]])
    cond = single_site_conditional(model, states, 1, 1)
    # neighbours of (1, 1): (0, 1)=1, (2, 1)=1 spatially; (1, 0)=1, (1, 2)=0 in time
    w = np.array([psi[1, s] * psi[1, s] * psi[1, s] * psi[s, 0] for s in range(2)])
    assert np.allclose(cond, w / w.sum())


def test_gibbs_matches_exact_small():
    psi = np.exp(0.5 * np.eye(2))
    model = MRFModel(2, 3, 2, psi)
    samples = mrf_gibbs_run(model, 2000, 50, seed=1, chains=100)
    assert samples.shape == (200_000, 2, 3)
    assert total_variation(mrf_exact(model), samples) < 0.02


def test_gibbs_respects_clamps_and_is_deterministic():
    model = MRFModel(3, 4, 2, np.exp(np.eye(2)), boundary_start=[1, 0, 1], boundary_end=[0, 0, 1])
    s1 = mrf_gibbs_run(model, 30, 3, seed=7, chains=4)
    s2 = mrf_gibbs_run(model, 30, 3, seed=7, chains=4)
    assert np.array_equal(s1, s2)
    assert np.all(s1[:, :, 0] == [1, 0, 1]) and np.all(s1[:, :, -1] == [0, 0, 1])
    single = mrf_gibbs_sample(model, 10, 2, seed=3)
    assert single.states.shape == (3, 4) and single.sampler


def test_uniform_potential_marginals():
    model = MRFModel(3, 3, 3, np.ones((3, 3)))
    samples = mrf_gibbs_run(model, 500, 10, seed=0, chains=40)
    assert np.abs(empirical_marginals(samples, 3) - 1 / 3).max() < 0.01


def test_potential_validation():
    with pytest.raises(ValueError):
        MRFModel(2, 2, 2, np.array([[1.0, 0.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        MRFModel(2, 2, 2, np.ones((3, 3)))
    with pytest.raises(ValueError):
        MRFModel(2, 2, 2, np.ones((2, 2)), boundary_start=[0, 2])


def _random_mp(rng, nx=3, nt=3):
    f = rng.random((2, 2, 2, 2)) + 0.05
    f /= f.sum(axis=-1, keepdims=True)
    init = rng.random(2**nx)
    return MPModel(nx, nt, 2, f, init / init.sum())


def test_mp_exact_chain_rule(rng):
    model = _random_mp(rng)
    joint = _as_dict(mp_exact(model))
    for flat in itertools.product(range(2), repeat=9):
        s = np.array(flat).reshape(3, 3)
        p = model.initial[int(s[:, 0] @ (2 ** np.arange(3)))]
        for t in range(1, 3):
            for x in range(3):
                p *= model.transition[s[(x - 1) % 3, t - 1], s[x, t - 1], s[(x + 1) % 3, t - 1], s[x, t]]
        assert abs(joint.get(int(config_index(s[None], 2)[0]), 0.0) - p) < 1e-15


def test_mp_sampler_matches_exact(rng):
    model = _random_mp(rng)
    samples = mp_sample_many(model, 200_000, seed=4)
    assert total_variation(mp_exact(model), samples) < 0.02
    assert np.array_equal(mp_sample(model, 9).states, mp_sample(model, 9).states)


def test_mp_validation():
    with pytest.raises(ValueError):
        MPModel(2, 2, 2, np.full((2, 2, 2, 2), 0.6), MPModel.product_initial([0.5, 0.5], 2))
    with pytest.raises(ValueError):
        MPModel(2, 2, 2, np.full((2, 2, 2, 2), 0.5), np.ones(3) / 3)


def test_reflection_symmetric_mrf_exact_zero():
    for model in (MRFModel(3, 3, 2, np.exp(0.5 * np.eye(2))),
                  MRFModel(3, 4, 2, np.exp(0.3 * np.eye(2)), boundary_start=[0, 1, 1],
                           boundary_end=[0, 1, 1])):
        assert time_reflection_report(model).tv_distance <= 1e-12


def test_reflection_detects_arrows_of_time(rng):
    asym_t = np.array([[1.0, 3.0], [0.5, 1.0]])
    assert time_reflection_report(MRFModel(2, 3, 2, np.ones((2, 2)), asym_t)).tv_distance > 0.01
    assert time_reflection_report(_random_mp(rng)).tv_distance > 0.01


def test_realizability_search_finds_grid_member():
    grid = [0.2, 0.5, 0.8]
    params = [0.2, 0.5, 0.8, 0.8, 0.5, 0.2, 0.5]
    # nx=3 so that left and right parents are distinct sites and every slot is used
    target = mp_exact(symmetric_binary_mp(3, 3, params))
    res = mp_realizability_search(target, 3, 3, grid)
    assert res["min_tv"] < 1e-12
    assert np.allclose(res["best_params"], params)
    assert res["grid_points"] == 3**7


def test_realizability_search_positive_for_mrf():
    model = MRFModel(2, 3, 2, np.exp(0.8 * np.eye(2)))
    res = mp_realizability_search(mrf_exact(model), 2, 3, [0.1, 0.3, 0.5, 0.7, 0.9])
    assert res["min_tv"] > 0.01
