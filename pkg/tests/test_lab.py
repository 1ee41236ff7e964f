import csv
import json
import math

import numpy as np
import pytest

from qfieldlab.lab import (EXPERIMENT_IDS, Check, ConfigError, RunManifest, default_config_path,
                           kink_energy, load_config, run_experiment, validate_config)

# desk-scale variants of the shipped configs; bounds scaled to the smaller samples
SMALL = {
    "exp_energy_equivalence": {"modes": {"n_max_free": 16, "n_max_phi4": 18, "n_max_refine": 20},
                               "ensemble": {"free_ensembles": 3, "members": 3}},
    "exp_reachability_gap": {"oscillator": {"n_max": 20, "n_max_refine": 24},
                             "optimizer": {"restarts": 3},
                             "tolerance": {"gap_stability": 1e-4}},
    "exp_q_gaussian": {"probes": {"count": 10}},
    "exp_soliton_mass": {"resolution": {"coarse": 0.1, "fine": 0.05},
                         "tolerance": {"fine_rel": 0.01}},
    "exp_mrf_vs_mp": {"mrf": {"sweeps": 200, "chains": 100}, "mp": {"samples": 100_000},
                      "search": {"grid": [0.2, 0.5, 0.8]}, "tolerance": {"sampler_tv": 0.06}},
    "exp_noise_ensemble": {"noise": {"steps": 60, "realizations": 200, "small_realizations": 40},
                           "tolerance": {"r2_min": 0.9, "slope_rel": 0.5}},
}


def small_config(exp):
    cfg = load_config(default_config_path(exp))
    for section, values in SMALL[exp].items():
        cfg[section].update(values)
    return cfg


def test_shipped_configs_validate():
    for exp in EXPERIMENT_IDS:
        cfg = load_config(default_config_path(exp))
        assert validate_config(cfg) is cfg
        assert cfg["run"]["experiment"] == exp


def test_validation_lists_every_problem():
    cfg = load_config(default_config_path("exp_soliton_mass"))
    del cfg["model"]["mass"]
    cfg["resolution"]["coarse"] = "fine"
    cfg["tolerance"]["bogus"] = 1.0
    cfg["extra"] = {}
    with pytest.raises(ConfigError) as info:
        validate_config(cfg)
    problems = info.value.problems
    assert len(problems) == 4
    text = "\n".join(problems)
    for needle in ("model.mass: missing", "resolution.coarse: expected float",
                   "tolerance.bogus: unknown key", "[extra]: unknown section"):
        assert needle in text


def test_validation_type_rules():
    cfg = load_config(default_config_path("exp_mrf_vs_mp"))
    cfg["lattice"]["nx"] = 3.0  # int required
    cfg["search"]["grid"] = []
    with pytest.raises(ConfigError) as info:
        validate_config(cfg)
    assert len(info.value.problems) == 2
    ok = load_config(default_config_path("exp_soliton_mass"))
    ok["model"]["mass"] = 1  # int accepted for a float field
    validate_config(ok)


def test_validation_unknown_and_mismatched_experiment():
    cfg = load_config(default_config_path("exp_q_gaussian"))
    with pytest.raises(ConfigError):
        validate_config({**cfg, "run": {"experiment": "exp_nope", "seed": 1}})
    with pytest.raises(ConfigError) as info:
        validate_config(cfg, "exp_soliton_mass")
    assert any("not 'exp_soliton_mass'" in p for p in info.value.problems)


def test_load_config_errors(tmp_path):
    bad = tmp_path / "bad.toml"
    bad.write_text("[run\nseed = 1\n")
    with pytest.raises(ConfigError):
        load_config(bad)
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")


def test_check_comparisons():
    assert Check("a", 1.0, 1.0, "<=").passed
    assert not Check("a", 1.0, 1.0, "<").passed
    assert Check("a", 2.0, 1.0, ">").passed
    assert not Check("a", float("nan"), 1.0, "<=").passed
    assert not Check("a", float("nan"), 1.0, ">=").passed


def test_manifest_json_roundtrip(tmp_path):
    man = RunManifest("exp_x", {"run": {"seed": 1}}, 1)
    man.check("inf value", float("inf"), ">", 0)
    man.data["arr"] = np.arange(3)
    man.data["flag"] = np.bool_(True)
    path = man.write(tmp_path / "out")
    loaded = json.loads(path.read_text())
    assert loaded["checks"][0]["measured"] == "inf"
    assert loaded["data"] == {"arr": [0, 1, 2], "flag": True}
    assert "started_at" not in man.reproducible_view()


@pytest.mark.parametrize("exp", EXPERIMENT_IDS)
def test_experiment_runs_and_reproduces(exp, tmp_path):
    cfg = small_config(exp)
    m1 = run_experiment(exp, cfg, tmp_path / "a")
    m2 = run_experiment(exp, cfg, tmp_path / "b")
    assert m1.passed, m1.summary_lines()
    assert m1.reproducible_view() == m2.reproducible_view()
    on_disk = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert on_disk["passed"] and on_disk["experiment"] == exp
    for name in on_disk["files"]:
        rows = list(csv.reader(open(tmp_path / "a" / name)))
        assert len(rows) > 1
        assert (tmp_path / "b" / name).read_bytes() == (tmp_path / "a" / name).read_bytes()


def test_seed_override_changes_random_draws(tmp_path):
    cfg = small_config("exp_q_gaussian")
    m1 = run_experiment("exp_q_gaussian", cfg, seed=7)
    m2 = run_experiment("exp_q_gaussian", cfg, seed=8)
    assert m1.seed == 7 and m1.config["run"]["seed"] == 7
    assert cfg["run"]["seed"] == 42  # caller's dict untouched
    assert [c.measured for c in m1.checks] != [c.measured for c in m2.checks]


def test_failing_tolerance_still_writes_manifest(tmp_path):
    cfg = small_config("exp_soliton_mass")
    cfg["tolerance"]["coarse_rel"] = 1e-9
    man = run_experiment("exp_soliton_mass", cfg, tmp_path)
    assert not man.passed
    on_disk = json.loads((tmp_path / "manifest.json").read_text())
    assert on_disk["passed"] is False
    assert [c["passed"] for c in on_disk["checks"]].count(False) == 1


def test_kink_energy_converges_second_order():
    exact = 8.0
    errs = [abs(kink_energy(1.0, 1.0, a, 10.0) - exact) / exact for a in (0.1, 0.05)]
    assert 3.5 < errs[0] / errs[1] < 4.5
    # lambda scaling: E * lambda is independent of lambda at fixed mass
    e1, e2 = kink_energy(1.0, 1.0, 0.1, 10.0), kink_energy(1.0, 3.0, 0.1, 10.0)
    assert math.isclose(e1, 3.0 * e2, rel_tol=1e-12)
