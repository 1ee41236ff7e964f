"""Named, reproducible experiments.

Each experiment takes a validated config dict (see :data:`SCHEMAS`) and an
optional output directory, recomputes its own oracles, and returns a
:class:`RunManifest` listing every check with its measured value and
tolerance. Outputs written to the directory:

* ``manifest.json``: the run record.
* ``<name>.csv``: per-check data tables.
"""
from __future__ import annotations

import csv
import json
import math
import time
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Callable

import numpy as np

from . import __version__
from .classical import (FieldModel, FieldState, LatticeSpec, NoiseSpec, classical_energy,
                        integrate_with_sources, make_initial_state, reversed_replay,
                        sample_noise_block, evolve)
from .fock import FockSpec, quartic_oscillator
from .hamiltonian import normal_ordered_hamiltonian
from .modes import ModeBasis, alpha_of, state_from_alpha
from .mrf import (MPModel, MRFModel, empirical_marginals, mp_exact, mp_realizability_search,
                  mp_sample_many, mrf_exact, mrf_gibbs_run, time_reflection_report,
                  total_variation)
from .pqmaps import (PointEnsemble, check_energy_equivalence, q_gaussian_check,
                     reachability_gap)

VOLATILE_KEYS = ("wall_clock_seconds", "started_at")


class ConfigError(ValueError):
    """Config failed validation; ``problems`` holds one message per field."""

    def __init__(self, problems: list[str]):
        super().__init__("; ".join(problems))
        self.problems = problems


# ---------------------------------------------------------------- schema

FLOAT, INT, STR, FLOATS = "float", "int", "str", "float-list"

_COMMON = {"run": {"experiment": STR, "seed": INT}}

SCHEMAS: dict[str, dict[str, dict[str, str]]] = {
    "exp_energy_equivalence": {
        "lattice": {"sites": INT, "spacing": FLOAT},
        "modes": {"count": INT, "n_max_free": INT, "n_max_phi4": INT, "n_max_refine": INT,
                  "n_max_sine_gordon": INT},
        "model": {"mass": FLOAT, "phi4_coupling": FLOAT, "sg_coupling": FLOAT},
        "ensemble": {"free_ensembles": INT, "members": INT, "amplitude": FLOAT,
                     "small_amplitude": FLOAT, "plane_wave_amplitude": FLOAT},
        "tolerance": {"free_rel": FLOAT, "phi4_rel": FLOAT, "sg_rel": FLOAT, "vacuum_abs": FLOAT,
                      "plane_wave_rel": FLOAT, "refine_floor": FLOAT},
    },
    "exp_reachability_gap": {
        "oscillator": {"coupling": FLOAT, "omega": FLOAT, "n_max": INT, "n_max_refine": INT},
        "optimizer": {"restarts": INT, "fd_step": FLOAT},
        "control": {"sites": INT, "modes": INT, "n_max": INT, "mass": FLOAT},
        "tolerance": {"e_coherent_abs": FLOAT, "gap_stability": FLOAT, "control_gap": FLOAT,
                      "shift_invariance": FLOAT, "shift": FLOAT},
    },
    "exp_q_gaussian": {
        "probes": {"count": INT, "spread": FLOAT},
        "single": {"sites": INT, "n_max": INT, "mass": FLOAT, "base_amplitude": FLOAT},
        "multi": {"sites": INT, "modes": INT, "n_max": INT, "mass": FLOAT, "base_amplitude": FLOAT},
        "tolerance": {"max_rel_dev": FLOAT},
    },
    "exp_soliton_mass": {
        "model": {"mass": FLOAT, "coupling": FLOAT, "half_width": FLOAT},
        "resolution": {"coarse": FLOAT, "fine": FLOAT},
        "scaling": {"couplings": FLOATS, "shift": FLOAT},
        "tolerance": {"coarse_rel": FLOAT, "fine_rel": FLOAT, "min_order": FLOAT,
                      "scaling_rel": FLOAT, "translation_rel": FLOAT},
    },
    "exp_mrf_vs_mp": {
        "lattice": {"nx": INT, "nt": INT},
        "mrf": {"coupling": FLOAT, "sweeps": INT, "burn_in": INT, "chains": INT},
        "mp": {"samples": INT, "initial_p1": FLOAT, "base": FLOAT, "slope": FLOAT},
        "search": {"grid": FLOATS},
        "tolerance": {"sampler_tv": FLOAT, "symmetric_tv": FLOAT, "asymmetry_min_tv": FLOAT,
                      "uniform_marginal": FLOAT, "search_min_tv": FLOAT},
    },
    "exp_noise_ensemble": {
        "lattice": {"sites": INT, "spacing": FLOAT},
        "model": {"mass": FLOAT},
        "noise": {"sigma": FLOAT, "small_sigma": FLOAT, "dt": FLOAT, "steps": INT,
                  "realizations": INT, "small_realizations": INT, "initial_sigma": FLOAT},
        "tolerance": {"r2_min": FLOAT, "slope_rel": FLOAT, "mean_sigmas": FLOAT,
                      "replay_abs": FLOAT},
    },
}

EXPERIMENT_IDS = tuple(SCHEMAS)


def _type_ok(value, kind: str) -> bool:
    if kind == INT:
        return isinstance(value, int) and not isinstance(value, bool)
    if kind == FLOAT:
        return isinstance(value, (int, float)) and not isinstance(value, bool)
    if kind == STR:
        return isinstance(value, str)
    if kind == FLOATS:
        return isinstance(value, list) and all(_type_ok(v, FLOAT) for v in value) and len(value) > 0
    raise AssertionError(kind)


def validate_config(config: dict, experiment: str | None = None) -> dict:
    """Check sections, keys and types; return the config unchanged or raise ConfigError."""
    problems = []
    exp = experiment or config.get("run", {}).get("experiment")
    if exp not in SCHEMAS:
        raise ConfigError([f"run.experiment: unknown experiment {exp!r}; "
                           f"registered: {', '.join(EXPERIMENT_IDS)}"])
    if experiment and config.get("run", {}).get("experiment") not in (None, experiment):
        problems.append(f"run.experiment: config is for {config['run']['experiment']!r}, "
                        f"not {experiment!r}")
    schema = {**_COMMON, **SCHEMAS[exp]}
    for section, keys in schema.items():
        got = config.get(section)
        if not isinstance(got, dict):
            problems.append(f"[{section}]: missing section")
            continue
        for key, kind in keys.items():
            if key not in got:
                problems.append(f"{section}.{key}: missing ({kind})")
            elif not _type_ok(got[key], kind):
                problems.append(f"{section}.{key}: expected {kind}, got {got[key]!r}")
        for key in got:
            if key not in keys:
                problems.append(f"{section}.{key}: unknown key")
    for section in config:
        if section not in schema:
            problems.append(f"[{section}]: unknown section")
    if problems:
        raise ConfigError(problems)
    return config


def load_config(path) -> dict:
    """Parse a TOML config file; syntax errors surface as ConfigError with line info."""
    try:
        import tomllib
    except ModuleNotFoundError:  # Python < 3.11
        import tomli as tomllib
    try:
        with open(path, "rb") as fh:
            return tomllib.load(fh)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError([f"{path}: {exc}"]) from exc
    except OSError as exc:
        raise ConfigError([f"{path}: {exc.strerror}"]) from exc


def default_config_path(experiment: str) -> Path:
    return Path(__file__).parent / "configs" / f"{experiment}.toml"


# -------------------------------------------------------------- manifest

def _jsonable(x):
    if isinstance(x, dict):
        return {k: _jsonable(v) for k, v in x.items()}
    if isinstance(x, np.ndarray):
        x = x.tolist()
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else repr(x)
    return x


@dataclass
class Check:
    name: str
    measured: float
    tolerance: float
    comparison: str  # "<=", ">=", "<", ">"

    @property
    def passed(self) -> bool:
        m, t = self.measured, self.tolerance
        if not math.isfinite(m) and not math.isinf(m):
            return False
        return {"<=": m <= t, ">=": m >= t, "<": m < t, ">": m > t}[self.comparison]

    def as_dict(self) -> dict:
        return {"name": self.name, "measured": self.measured, "comparison": self.comparison,
                "tolerance": self.tolerance, "passed": self.passed}


@dataclass
class RunManifest:
    experiment: str
    config: dict
    seed: int
    checks: list[Check] = field(default_factory=list)
    data: dict = field(default_factory=dict)
    files: list[str] = field(default_factory=list)
    code_version: str = __version__
    wall_clock_seconds: float = 0.0
    started_at: str = ""

    def check(self, name, measured, comparison, tolerance) -> Check:
        c = Check(name, float(measured), float(tolerance), comparison)
        self.checks.append(c)
        return c

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def as_dict(self) -> dict:
        return _jsonable({
            "experiment": self.experiment, "code_version": self.code_version,
            "seed": self.seed, "config": self.config,
            "started_at": self.started_at, "wall_clock_seconds": self.wall_clock_seconds,
            "passed": self.passed, "checks": [c.as_dict() for c in self.checks],
            "data": self.data, "files": self.files})

    def reproducible_view(self) -> dict:
        d = self.as_dict()
        for k in VOLATILE_KEYS:
            d.pop(k, None)
        return d

    def write(self, out_dir: Path) -> Path:
        out_dir.mkdir(parents=True, exist_ok=True)
        path = out_dir / "manifest.json"
        path.write_text(json.dumps(self.as_dict(), indent=2, sort_keys=False) + "\n")
        return path

    def summary_lines(self) -> list[str]:
        return [f"{'PASS' if c.passed else 'FAIL'}  {c.name}: {c.measured:.6g} {c.comparison} {c.tolerance:.6g}"
                for c in self.checks]


def _write_csv(manifest: RunManifest, out_dir: Path | None, name: str, header, rows):
    if out_dir is None:
        return
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / name, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([repr(float(v)) if isinstance(v, (float, np.floating)) else v for v in row])
    manifest.files.append(name)


# ----------------------------------------------------------- experiments

def _random_alpha(rng, m, scale):
    return scale * (rng.standard_normal(m) + 1j * rng.standard_normal(m)) / np.sqrt(2)


def _interaction_rel_err(report, ensemble, free_model, basis) -> float:
    """Relative mismatch of the non-quadratic energy alone (total minus free part)."""
    rf = check_energy_equivalence(ensemble, free_model, basis)
    lhs, rhs = report.lhs - rf.lhs, report.rhs - rf.rhs
    return abs(lhs - rhs) / abs(rhs)


def exp_energy_equivalence(config: dict, out_dir: Path | None = None) -> RunManifest:
    seed = config["run"]["seed"]
    man = RunManifest("exp_energy_equivalence", config, seed)
    lc, mc, mo, en, tol = (config[k] for k in ("lattice", "modes", "model", "ensemble", "tolerance"))
    lat = LatticeSpec(lc["sites"], lc["spacing"])
    mass = (mo["mass"],)
    rng = np.random.default_rng(seed)
    rows = []

    # free field: the check that pins the coherent scale c = 1/sqrt(2)
    free = FieldModel(mass, lat, "free")
    basis = ModeBasis.lowest(lat, mass, mc["n_max_free"], count=mc["count"])
    hn = normal_ordered_hamiltonian(free, basis)
    vac = make_initial_state("vacuum", free)
    r = check_energy_equivalence(PointEnsemble([vac]), free, basis, hamiltonian=hn)
    man.check("vacuum |lhs - rhs|", r.abs_err, "<=", tol["vacuum_abs"])
    man.check("vacuum |lhs|", abs(r.lhs), "<=", tol["vacuum_abs"])
    rows.append(("vacuum", 0, r.lhs, r.rhs, r.abs_err, r.rel_err))

    k0 = 2 * np.pi / lat.length
    wave = make_initial_state("plane-wave", free, k=k0, amplitude=en["plane_wave_amplitude"])
    r = check_energy_equivalence(PointEnsemble([wave]), free, basis, hamiltonian=hn)
    alpha = alpha_of(wave, basis)
    i_k = basis.modes.index((0, 1))
    closed = basis.frequencies[i_k] * abs(alpha[i_k]) ** 2
    man.check("plane wave rel_err", r.rel_err, "<=", tol["plane_wave_rel"])
    man.check("plane wave vs w|alpha|^2", abs(r.lhs - closed) / closed, "<=", tol["plane_wave_rel"])
    rows.append(("plane-wave", 0, r.lhs, r.rhs, r.abs_err, r.rel_err))

    worst = 0.0
    m = len(basis.modes)
    for i in range(en["free_ensembles"]):
        s = state_from_alpha(_random_alpha(rng, m, en["amplitude"]), basis)
        r = check_energy_equivalence(PointEnsemble([s]), free, basis, hamiltonian=hn)
        worst = max(worst, r.rel_err)
        rows.append(("free", i, r.lhs, r.rhs, r.abs_err, r.rel_err))
    man.check(f"free field max rel_err over {en['free_ensembles']} point ensembles", worst,
              "<=", tol["free_rel"])

    # phi^4, one weighted ensemble, two cutoffs
    phi4 = FieldModel(mass, lat, "phi4", mo["phi4_coupling"])
    members = [state_from_alpha(_random_alpha(rng, m, en["small_amplitude"]), basis)
               for _ in range(en["members"])]
    weights = rng.random(en["members"]) + 0.1
    ens = PointEnsemble(members, weights)
    errs, int_errs = {}, {}
    for n_max in (mc["n_max_phi4"], mc["n_max_refine"]):
        b = ModeBasis.lowest(lat, mass, n_max, count=mc["count"])
        r = check_energy_equivalence(ens, phi4, b)
        errs[n_max] = r.rel_err
        int_errs[n_max] = _interaction_rel_err(r, ens, free, b)
        rows.append((f"phi4@n_max={n_max}", -1, r.lhs, r.rhs, r.abs_err, r.rel_err))
    man.check(f"phi4 rel_err at n_max={mc['n_max_phi4']}", errs[mc["n_max_phi4"]], "<=", tol["phi4_rel"])
    man.check(f"phi4 rel_err at n_max={mc['n_max_refine']}", errs[mc["n_max_refine"]], "<=", tol["phi4_rel"])
    # the quartic part is a small fraction of the total at small amplitude; check it on its own
    man.check(f"phi4 interaction-part rel_err at n_max={mc['n_max_phi4']}",
              int_errs[mc["n_max_phi4"]], "<=", tol["phi4_rel"])
    man.check("phi4 refinement does not increase error",
              errs[mc["n_max_refine"]] - max(errs[mc["n_max_phi4"]], tol["refine_floor"]), "<=", 0.0)

    sg = FieldModel(mass, lat, "sine-gordon", mo["sg_coupling"])
    b = ModeBasis.lowest(lat, mass, mc["n_max_sine_gordon"], count=mc["count"])
    r = check_energy_equivalence(ens, sg, b)
    rows.append((f"sine-gordon@n_max={mc['n_max_sine_gordon']}", -1, r.lhs, r.rhs, r.abs_err, r.rel_err))
    man.check("sine-gordon rel_err", r.rel_err, "<=", tol["sg_rel"])
    man.check("sine-gordon interaction-part rel_err", _interaction_rel_err(r, ens, free, b),
              "<=", tol["sg_rel"])

    man.data["phi4_rel_err"] = {str(k): v for k, v in errs.items()}
    _write_csv(man, out_dir, "energy_equivalence.csv",
               ("case", "member", "lhs", "rhs", "abs_err", "rel_err"), rows)
    return man


def exp_reachability_gap(config: dict, out_dir: Path | None = None) -> RunManifest:
    seed = config["run"]["seed"]
    man = RunManifest("exp_reachability_gap", config, seed)
    osc, opt, ctl, tol = (config[k] for k in ("oscillator", "optimizer", "control", "tolerance"))
    reports = {}
    for n_max in (osc["n_max"], osc["n_max_refine"]):
        fock = FockSpec(1, n_max)
        hn = quartic_oscillator(fock, osc["coupling"], osc["omega"])
        reports[n_max] = reachability_gap(hn, fock, opt["restarts"], seed, opt["fd_step"])
    lo, hi = reports[osc["n_max"]], reports[osc["n_max_refine"]]
    man.check(f"e_quantum at n_max={osc['n_max_refine']}", hi.e_quantum, "<", 0.0)
    man.check("|e_coherent_min|", abs(hi.e_coherent_min), "<=", tol["e_coherent_abs"])
    man.check("gap", hi.gap, ">", 0.0)
    man.check(f"|gap(n_max={osc['n_max']}) - gap(n_max={osc['n_max_refine']})|",
              abs(lo.gap - hi.gap), "<=", tol["gap_stability"])
    man.check("optimizer converged", float(hi.converged), ">=", 1.0)

    fock = FockSpec(1, osc["n_max"])
    shifted = quartic_oscillator(fock, osc["coupling"], osc["omega"]).shifted(tol["shift"])
    rs = reachability_gap(shifted, fock, opt["restarts"], seed, opt["fd_step"])
    man.check("gap invariant under H + k I", abs(rs.gap - lo.gap), "<=", tol["shift_invariance"])

    lat = LatticeSpec(ctl["sites"], 1.0)
    basis = ModeBasis.lowest(lat, (ctl["mass"],), ctl["n_max"], count=ctl["modes"])
    free = FieldModel((ctl["mass"],), lat, "free")
    rc = reachability_gap(normal_ordered_hamiltonian(free, basis), basis.fock,
                          opt["restarts"], seed, opt["fd_step"])
    man.check("free-field control gap", abs(rc.gap), "<=", tol["control_gap"])

    rows = [(n, r.e_quantum, r.e_coherent_min, r.gap) for n, r in sorted(reports.items())]
    rows.append(("control", rc.e_quantum, rc.e_coherent_min, rc.gap))
    man.data = {"quartic": {str(n): r.as_dict() for n, r in reports.items()},
                "control": rc.as_dict()}
    _write_csv(man, out_dir, "reachability_gap.csv",
               ("n_max", "e_quantum", "e_coherent_min", "gap"), rows)
    return man


def exp_q_gaussian(config: dict, out_dir: Path | None = None) -> RunManifest:
    seed = config["run"]["seed"]
    man = RunManifest("exp_q_gaussian", config, seed)
    pr, tol = config["probes"], config["tolerance"]
    rng = np.random.default_rng(seed)
    rows = []
    for label, sec, count in (("M=1", config["single"], 1), ("M=3", config["multi"], None)):
        lat = LatticeSpec(sec["sites"], 1.0)
        basis = ModeBasis.lowest(lat, (sec["mass"],), sec["n_max"],
                                 count=count if count else sec["modes"])
        base = state_from_alpha(_random_alpha(rng, len(basis.modes), sec["base_amplitude"]), basis)
        rep = q_gaussian_check(base, basis, pr["count"], seed + len(rows), pr["spread"])
        man.check(f"{label} max relative deviation over {pr['count']} probes", rep.max_rel_dev,
                  "<=", tol["max_rel_dev"])
        rows.append((label, len(basis.modes), sec["n_max"], rep.max_rel_dev, rep.min_q))
    _write_csv(man, out_dir, "q_gaussian.csv", ("case", "modes", "n_max", "max_rel_dev", "min_q"), rows)
    return man


def kink_energy(mass: float, coupling: float, spacing: float, half_width: float,
                shift: float = 0.0) -> float:
    """Lattice energy of the analytic kink on a lattice spanning +/- half_width/m."""
    sites = int(round(2 * half_width / mass / spacing))
    lat = LatticeSpec(sites, spacing)
    model = FieldModel((mass,), lat, "sine-gordon", coupling)
    state = make_initial_state("kink", model, center=0.5 * lat.length + shift * spacing)
    return classical_energy(state, model)


def exp_soliton_mass(config: dict, out_dir: Path | None = None) -> RunManifest:
    seed = config["run"]["seed"]
    man = RunManifest("exp_soliton_mass", config, seed)
    mo, res, sc, tol = (config[k] for k in ("model", "resolution", "scaling", "tolerance"))
    m, lam, hw = mo["mass"], mo["coupling"], mo["half_width"]
    exact = 8 * m**3 / lam
    e_c = kink_energy(m, lam, res["coarse"], hw)
    e_f = kink_energy(m, lam, res["fine"], hw)
    err_c, err_f = abs(e_c - exact) / exact, abs(e_f - exact) / exact
    order = math.log(err_c / err_f) / math.log(res["coarse"] / res["fine"])
    man.check(f"rel error at a={res['coarse']}", err_c, "<=", tol["coarse_rel"])
    man.check(f"rel error at a={res['fine']}", err_f, "<=", tol["fine_rel"])
    man.check("observed convergence order", order, ">=", tol["min_order"])
    # Richardson extrapolation assuming second order
    ratio = (res["coarse"] / res["fine"]) ** 2
    extrap = (ratio * e_f - e_c) / (ratio - 1)
    scaled = [kink_energy(m, g, res["coarse"], hw) * g for g in sc["couplings"]]
    spread = (max(scaled) - min(scaled)) / abs(np.mean(scaled))
    man.check("energy x lambda spread across couplings", spread, "<=", tol["scaling_rel"])
    e_shift = kink_energy(m, lam, res["coarse"], hw, shift=sc["shift"])
    man.check("translated kink energy change", abs(e_shift - e_c) / e_c, "<=", tol["translation_rel"])
    man.data = {"exact": exact, "coarse": e_c, "fine": e_f, "order": order,
                "richardson": extrap, "richardson_rel_err": abs(extrap - exact) / exact}
    rows = [(res["coarse"], e_c, err_c), (res["fine"], e_f, err_f)]
    _write_csv(man, out_dir, "soliton_mass.csv", ("spacing", "energy", "rel_err"), rows)
    return man


def _mixing_mp(nx, nt, initial_p1, base, slope) -> MPModel:
    f = np.empty((2, 2, 2, 2))
    for l in range(2):
        for c in range(2):
            for r in range(2):
                p1 = base + slope * (l + c + r) / 3
                f[l, c, r] = (1 - p1, p1)
    return MPModel(nx, nt, 2, f, MPModel.product_initial([1 - initial_p1, initial_p1], nx))


def exp_mrf_vs_mp(config: dict, out_dir: Path | None = None) -> RunManifest:
    seed = config["run"]["seed"]
    man = RunManifest("exp_mrf_vs_mp", config, seed)
    lc, mc, pc, sc, tol = (config[k] for k in ("lattice", "mrf", "mp", "search", "tolerance"))
    nx, nt = lc["nx"], lc["nt"]
    psi = np.exp(mc["coupling"] * np.eye(2))

    mrf = MRFModel(nx, nt, 2, psi)
    joint = mrf_exact(mrf)
    samples = mrf_gibbs_run(mrf, mc["sweeps"], mc["burn_in"], seed, chains=mc["chains"])
    man.check(f"MRF Gibbs vs exact TV ({len(samples)} samples)", total_variation(joint, samples),
              "<=", tol["sampler_tv"])

    flat = MRFModel(nx, nt, 2, np.ones((2, 2)))
    s_flat = mrf_gibbs_run(flat, mc["sweeps"], mc["burn_in"], seed + 1, chains=mc["chains"])
    dev = float(np.abs(empirical_marginals(s_flat, 2) - 0.5).max())
    man.check("uniform-potential marginal deviation", dev, "<=", tol["uniform_marginal"])

    clamp = np.arange(nx) % 2
    clamped = MRFModel(nx, nt, 2, psi, boundary_start=clamp, boundary_end=clamp)
    s_cl = mrf_gibbs_run(clamped, 50, 5, seed + 2, chains=16)
    violations = int(np.sum(s_cl[:, :, 0] != clamp) + np.sum(s_cl[:, :, -1] != clamp))
    man.check("clamp violations", violations, "<=", 0)

    mp = _mixing_mp(nx, nt, pc["initial_p1"], pc["base"], pc["slope"])
    mp_joint = mp_exact(mp)
    mp_samples = mp_sample_many(mp, pc["samples"], seed + 3)
    man.check(f"MP sampler vs exact TV ({pc['samples']} samples)", total_variation(mp_joint, mp_samples),
              "<=", tol["sampler_tv"])

    sym = time_reflection_report(mrf)
    man.check("symmetric MRF reflection TV", sym.tv_distance, "<=", tol["symmetric_tv"])
    sym_cl = time_reflection_report(clamped)
    man.check("symmetric-clamp MRF reflection TV", sym_cl.tv_distance, "<=", tol["symmetric_tv"])
    mp_ref = time_reflection_report(mp)
    man.check("forward MP reflection TV", mp_ref.tv_distance, ">", tol["asymmetry_min_tv"])
    asym = MRFModel(nx, nt, 2, psi, boundary_start=np.zeros(nx, int), boundary_end=np.ones(nx, int))
    asym_ref = time_reflection_report(asym)
    man.check("asymmetric-boundary MRF reflection TV", asym_ref.tv_distance, ">", tol["asymmetry_min_tv"])

    search = mp_realizability_search(joint, nx, nt, sc["grid"])
    man.check("min TV between MRF joint and grid MP family", search["min_tv"], ">", tol["search_min_tv"])

    man.data = {"mp_reflection_tv": mp_ref.tv_distance, "asym_mrf_reflection_tv": asym_ref.tv_distance,
                "search": search}
    _write_csv(man, out_dir, "mrf_exact.csv", ("configuration_index", "probability"),
               zip(joint.indices.tolist(), joint.probs))
    _write_csv(man, out_dir, "mp_exact.csv", ("configuration_index", "probability"),
               zip(mp_joint.indices.tolist(), mp_joint.probs))
    return man


def _zero_mode_momentum(state: FieldState, lat: LatticeSpec) -> float:
    return float(lat.spacing * state.pi[0].sum() / np.sqrt(lat.length))


def exp_noise_ensemble(config: dict, out_dir: Path | None = None) -> RunManifest:
    seed = config["run"]["seed"]
    man = RunManifest("exp_noise_ensemble", config, seed)
    lc, mc, nc, tol = (config[k] for k in ("lattice", "model", "noise", "tolerance"))
    lat = LatticeSpec(lc["sites"], lc["spacing"])
    model = FieldModel((mc["mass"],), lat, "free")
    dt, steps = nc["dt"], nc["steps"]
    init = make_initial_state("gaussian-random", model, sigma=nc["initial_sigma"], seed=seed)

    silent = sample_noise_block(NoiseSpec([[0.0]], seed), lat, steps, dt)
    traj = integrate_with_sources(init, model, silent, dt, record_every=0)
    det, _ = evolve(init, model, dt, steps)
    same = np.array_equal(traj[-1].phi, det.phi) and np.array_equal(traj[-1].pi, det.pi)
    man.check("zero-noise trajectory differs from deterministic", float(not same), "<=", 0.0)

    # zero-mode momentum diffusion: Var = sigma * t exactly when m = 0
    times = dt * np.arange(1, steps + 1)
    zero = np.empty((nc["realizations"], steps))
    for r in range(nc["realizations"]):
        block = sample_noise_block(NoiseSpec([[nc["sigma"]]], seed + r), lat, steps, dt)
        tr = integrate_with_sources(init, model, block, dt, record_every=1)
        zero[r] = [_zero_mode_momentum(s, lat) for s in tr[1:]]
    var = zero.var(axis=0, ddof=1)
    slope, intercept = np.polyfit(times, var, 1)
    fit = slope * times + intercept
    r2 = 1 - np.sum((var - fit) ** 2) / np.sum((var - var.mean()) ** 2)
    man.check("zero-mode variance linear fit R^2", r2, ">=", tol["r2_min"])
    if mc["mass"] == 0:
        man.check("zero-mode variance slope vs sigma", abs(slope - nc["sigma"]) / nc["sigma"],
                  "<=", tol["slope_rel"])

    vac = make_initial_state("vacuum", model)
    finals = []
    for r in range(nc["small_realizations"]):
        block = sample_noise_block(NoiseSpec([[nc["small_sigma"]]], seed + 10**6 + r), lat, steps, dt)
        finals.append(integrate_with_sources(vac, model, block, dt, record_every=0)[-1].phi[0])
    finals = np.array(finals)
    z = np.abs(finals.mean(axis=0)) / (finals.std(axis=0, ddof=1) / np.sqrt(len(finals)))
    man.check("ensemble-mean field |z| (max over sites)", float(z.max()), "<=", tol["mean_sigmas"])

    block = sample_noise_block(NoiseSpec([[nc["sigma"]]], seed), lat, steps, dt)
    final = integrate_with_sources(init, model, block, dt, record_every=0)[-1]
    back = reversed_replay(final, model, block, dt)
    err = max(np.abs(back.phi - init.phi).max(), np.abs(back.pi - init.pi).max())
    man.check("reversed replay max deviation", err, "<=", tol["replay_abs"])

    man.data = {"variance_slope": slope, "variance_intercept": intercept, "r2": r2}
    _write_csv(man, out_dir, "zero_mode_variance.csv", ("step", "t", "variance"),
               [(k + 1, t, v) for k, (t, v) in enumerate(zip(times, var))])
    return man


EXPERIMENTS: dict[str, Callable[[dict, Path | None], RunManifest]] = {
    "exp_energy_equivalence": exp_energy_equivalence,
    "exp_reachability_gap": exp_reachability_gap,
    "exp_q_gaussian": exp_q_gaussian,
    "exp_soliton_mass": exp_soliton_mass,
    "exp_mrf_vs_mp": exp_mrf_vs_mp,
    "exp_noise_ensemble": exp_noise_ensemble,
}


def run_experiment(experiment: str, config: dict, out_dir=None, seed: int | None = None) -> RunManifest:
    """Validate, run, and (when ``out_dir`` is given) write the manifest."""
    config = json.loads(json.dumps(config))  # private copy
    if seed is not None:
        config.setdefault("run", {})["seed"] = int(seed)
    validate_config(config, experiment)
    out = Path(out_dir) if out_dir is not None else None
    started = datetime.now(timezone.utc).isoformat(timespec="seconds")
    t0 = time.perf_counter()
    man = EXPERIMENTS[experiment](config, out)
    man.wall_clock_seconds = round(time.perf_counter() - t0, 3)
    man.started_at = started
    if out is not None:
        man.write(out)
    return man
