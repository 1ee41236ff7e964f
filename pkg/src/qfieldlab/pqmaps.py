"""Coherent-state maps between classical field ensembles and density matrices.

* :func:`coherent_vector` turns a field state into a multimode coherent state.
* :func:`q_probability` evaluates <v(S)| rho |v(S)> (Husimi-type, unnormalized;
  the normalized density over the alpha-plane carries 1/pi^M).
* :func:`p_reconstruct` averages coherent projectors over a classical ensemble.
* :func:`check_energy_equivalence`, :func:`q_gaussian_check` and
  :func:`reachability_gap` are the numerical checks built on top.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np
import scipy.optimize
import scipy.special

from .classical import FieldModel, FieldState, classical_energy
from .fock import DensityMatrix, FockSpec, OperatorMatrix, ground_state
from .hamiltonian import normal_ordered_hamiltonian
from .modes import (COHERENT_SCALE, ModeBasis, alpha_of, field_to_amplitudes,
                    state_from_alpha)

TAIL_LIMIT = 1e-8


def poisson_tail(mean, n_max: int):
    """P(n > n_max) for n ~ Poisson(mean)."""
    mean = np.asarray(mean, dtype=float)
    return np.where(mean > 0, scipy.special.pdtrc(n_max, np.maximum(mean, 1e-300)), 0.0)


def single_mode_coherent(alpha, n_max: int) -> np.ndarray:
    """Normalized truncated coherent vectors, shape (..., n_max+1).

    Entries are alpha^n / sqrt(n!) renormalized on 0..n_max, i.e. the
    normalized projection of exp(alpha a†)|0>.
    """
    alpha = np.asarray(alpha, dtype=complex)
    out = np.empty(alpha.shape + (n_max + 1,), dtype=complex)
    out[..., 0] = 1.0
    for n in range(1, n_max + 1):
        out[..., n] = out[..., n - 1] * alpha / np.sqrt(n)
    out /= np.linalg.norm(out, axis=-1, keepdims=True)
    return out


@dataclass(frozen=True, eq=False)
class CoherentVector:
    vector: np.ndarray
    alpha: np.ndarray
    tail: float

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.vector))


def coherent_from_alpha(alpha: Sequence[complex], fock: FockSpec, warn: bool = True) -> CoherentVector:
    alpha = np.asarray(alpha, dtype=complex)
    if alpha.shape != (fock.modes,):
        raise ValueError(f"need {fock.modes} amplitudes, got {alpha.shape}")
    tails = poisson_tail(np.abs(alpha) ** 2, fock.n_max)
    tail = float(1 - np.prod(1 - tails))
    if warn and tail > TAIL_LIMIT:
        warnings.warn(f"coherent state truncation tail {tail:.2e} exceeds {TAIL_LIMIT:g}",
                      RuntimeWarning, stacklevel=2)
    per_mode = single_mode_coherent(alpha, fock.n_max)
    vec = per_mode[0]
    for k in range(1, fock.modes):
        # mode 0 varies fastest
        vec = np.kron(per_mode[k], vec)
    return CoherentVector(vec, alpha, tail)


def coherent_vector(state: FieldState, basis: ModeBasis, warn: bool = True) -> CoherentVector:
    """v(S) over the basis's selected modes."""
    return coherent_from_alpha(alpha_of(state, basis), basis.fock, warn=warn)


def q_probability(rho: DensityMatrix, state: FieldState, basis: ModeBasis) -> float:
    """<v(S)| rho |v(S)> with v(S) normalized."""
    if rho.dim != basis.fock.dim:
        raise ValueError(f"density matrix dim {rho.dim} != Fock dim {basis.fock.dim}")
    return rho.overlap(coherent_vector(state, basis).vector)


def husimi_grid(rho: DensityMatrix, alphas) -> np.ndarray:
    """Single-mode Husimi function <alpha|rho|alpha> on an array of alphas.

    Uses the untruncated coherent state (amplitudes exp(-|alpha|^2/2)
    alpha^n/sqrt(n!), not renormalized), so rho is treated as a state of the
    full oscillator and Q/pi integrates to Tr(rho) over the plane.
    """
    alphas = np.asarray(alphas, dtype=complex)
    vecs = single_mode_coherent(alphas.ravel(), rho.dim - 1)
    # undo the renormalization; the kept weight is the Poisson CDF at n_max
    keep = scipy.special.pdtr(rho.dim - 1, np.abs(alphas.ravel()) ** 2)
    vecs = vecs * np.sqrt(keep)[:, None]
    if rho.is_factored:
        amps = vecs.conj() @ rho.vectors.T
        vals = np.abs(amps) ** 2 @ rho.weights
    else:
        vals = np.einsum("pi,ij,pj->p", vecs.conj(), rho.matrix(), vecs).real
    return vals.reshape(alphas.shape)


# ----------------------------------------------------------------- ensembles

@dataclass(frozen=True, eq=False)
class PointEnsemble:
    """Finite weighted list of field states."""

    states: tuple[FieldState, ...]
    weights: np.ndarray

    def __init__(self, states, weights=None):
        states = tuple(states)
        if not states:
            raise ValueError("empty ensemble")
        w = np.ones(len(states)) if weights is None else np.asarray(weights, dtype=float)
        if w.shape != (len(states),) or np.any(w < 0) or w.sum() <= 0:
            raise ValueError("weights must be nonnegative, one per state, not all zero")
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "weights", w / w.sum())


@dataclass(frozen=True, eq=False)
class GaussianEnsemble:
    """Complex Gaussian around a base state in selected-mode alpha coordinates.

    Each selected mode gets alpha = alpha_0 + delta with E|delta|^2 = width^2
    (isotropic in Re/Im). With base at the vacuum and width^2 = nbar this is
    the Glauber P function of a thermal state.
    """

    base: FieldState
    width: float | np.ndarray
    seed: int = 0

    def sample_alpha(self, basis: ModeBasis, n: int, rng=None) -> np.ndarray:
        rng = np.random.default_rng(self.seed) if rng is None else rng
        m = len(basis.modes)
        width = np.broadcast_to(np.asarray(self.width, dtype=float), (m,))
        z = rng.standard_normal((n, m)) + 1j * rng.standard_normal((n, m))
        return alpha_of(self.base, basis)[None, :] + z * width / np.sqrt(2)


ClassicalEnsemble = Union[PointEnsemble, GaussianEnsemble]


def _require_subspace(state: FieldState, basis: ModeBasis, tol: float = 1e-10):
    frac = basis.outside_weight(state)
    if frac > tol:
        raise ValueError(f"state has {frac:.2e} of its mode weight outside the selected modes; "
                         "project it with basis.project first")


def p_reconstruct(ensemble: ClassicalEnsemble, basis: ModeBasis, samples: int | None = None,
                  chunk: int = 20000) -> tuple[DensityMatrix, float]:
    """rho = E[|v(S)><v(S)|] over the ensemble, with a standard-error estimate.

    Point ensembles are summed exactly (error 0). Gaussian ensembles are
    sampled; the returned error is sqrt((1 - ||rho||_F^2) / samples), the
    Frobenius standard error of a mean of unit-rank projectors.
    """
    fock = basis.fock
    if isinstance(ensemble, PointEnsemble):
        for s in ensemble.states:
            _require_subspace(s, basis)
        vecs = [coherent_vector(s, basis).vector for s in ensemble.states]
        return DensityMatrix(vectors=vecs, weights=ensemble.weights), 0.0
    if not samples or samples < 1:
        raise ValueError("sampling a Gaussian ensemble needs samples >= 1")
    rng = np.random.default_rng(ensemble.seed)
    rho = np.zeros((fock.dim, fock.dim), dtype=complex)
    done = 0
    while done < samples:
        n = min(chunk, samples - done)
        alphas = ensemble.sample_alpha(basis, n, rng)
        per_mode = single_mode_coherent(alphas, fock.n_max)  # (n, M, d)
        vecs = per_mode[:, 0, :]
        for k in range(1, fock.modes):
            vecs = np.einsum("na,nb->nab", per_mode[:, k, :], vecs).reshape(n, -1)
        rho += vecs.T @ vecs.conj()
        done += n
    rho /= samples
    rho = 0.5 * (rho + rho.conj().T)
    rho /= np.trace(rho).real
    purity = float(np.sum(np.abs(rho) ** 2))
    return DensityMatrix(rho), float(np.sqrt(max(1.0 - purity, 0.0) / samples))


def thermal_density(nbar: float, n_max: int) -> np.ndarray:
    """diag(nbar^n / (1+nbar)^(n+1)), renormalized on 0..n_max."""
    n = np.arange(n_max + 1)
    p = nbar**n / (1 + nbar) ** (n + 1)
    return np.diag(p / p.sum()).astype(complex)


def trace_distance(rho1, rho2) -> float:
    r1 = rho1.matrix() if isinstance(rho1, DensityMatrix) else np.asarray(rho1)
    r2 = rho2.matrix() if isinstance(rho2, DensityMatrix) else np.asarray(rho2)
    return 0.5 * float(np.abs(np.linalg.eigvalsh(r1 - r2)).sum())


# ------------------------------------------------------------ energy checks

@dataclass(frozen=True)
class EnergyReport:
    lhs: float
    rhs: float
    abs_err: float
    rel_err: float

    def as_dict(self) -> dict:
        return {"lhs": self.lhs, "rhs": self.rhs, "abs_err": self.abs_err, "rel_err": self.rel_err}


def _report(lhs: float, rhs: float) -> EnergyReport:
    err = abs(lhs - rhs)
    rel = err / abs(rhs) if rhs != 0 else (0.0 if err == 0 else np.inf)
    return EnergyReport(float(lhs), float(rhs), float(err), float(rel))


def check_energy_equivalence(ensemble: ClassicalEnsemble, model: FieldModel, basis: ModeBasis,
                             samples: int | None = None,
                             hamiltonian: OperatorMatrix | None = None) -> EnergyReport:
    """Compare Tr(rho H_n) with the classical mean energy <H(S)>.

    Point ensembles: lhs = sum_k w_k <v(S_k)|H_n|v(S_k)>, rhs = sum_k w_k H(S_k).
    Gaussian ensembles: both sides averaged over the same ``samples`` draws.
    """
    hn = normal_ordered_hamiltonian(model, basis) if hamiltonian is None else hamiltonian
    if isinstance(ensemble, PointEnsemble):
        lhs = rhs = 0.0
        for w, s in zip(ensemble.weights, ensemble.states):
            _require_subspace(s, basis)
            cv = coherent_vector(s, basis, warn=False)
            if cv.tail > TAIL_LIMIT:
                raise ValueError(f"ensemble member not representable: truncation tail {cv.tail:.2e}")
            lhs += w * hn.expect_vector(cv.vector).real
            rhs += w * classical_energy(s, model)
        return _report(lhs, rhs)
    if not samples:
        raise ValueError("Gaussian ensembles need samples >= 1")
    rng = np.random.default_rng(ensemble.seed)
    alphas = ensemble.sample_alpha(basis, samples, rng)
    lhs = rhs = 0.0
    for al in alphas:
        cv = coherent_from_alpha(al, basis.fock, warn=False)
        if cv.tail > TAIL_LIMIT:
            raise ValueError(f"sampled state not representable: truncation tail {cv.tail:.2e}")
        lhs += hn.expect_vector(cv.vector).real
        rhs += classical_energy(state_from_alpha(al, basis), model)
    return _report(lhs / samples, rhs / samples)


@dataclass(frozen=True)
class GaussianQReport:
    max_rel_dev: float
    probes: int
    min_q: float

    def as_dict(self) -> dict:
        return {"max_rel_dev": self.max_rel_dev, "probes": self.probes, "min_q": self.min_q}


def gaussian_q_prediction(state: FieldState, base: FieldState, basis: ModeBasis) -> float:
    """exp(-sum_p |c dtheta|^2 + |c dtau|^2) over the selected modes, c = 1/sqrt(2)."""
    a1 = field_to_amplitudes(state, basis)
    a0 = field_to_amplitudes(base, basis)
    dth = COHERENT_SCALE * basis.select(a1.theta - a0.theta)
    dta = COHERENT_SCALE * basis.select(a1.tau - a0.tau)
    return float(np.exp(-np.sum(np.abs(dth) ** 2 + np.abs(dta) ** 2)))


def q_gaussian_check(base: FieldState, basis: ModeBasis, probes: int, seed: int,
                     spread: float = 0.5) -> GaussianQReport:
    """Q of the coherent state at ``base`` against the unit-variance Gaussian form.

    Probe states are ``base`` plus complex-Gaussian alpha displacements with
    E|delta alpha|^2 = spread^2 per mode; probe 0 is the base itself.
    """
    _require_subspace(base, basis)
    rho = DensityMatrix.pure(coherent_vector(base, basis).vector)
    rng = np.random.default_rng(seed)
    alpha0 = alpha_of(base, basis)
    m = len(basis.modes)
    worst, qmin = 0.0, 1.0
    for i in range(probes):
        if i == 0:
            probe = base
        else:
            d = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) * spread / np.sqrt(2)
            probe = state_from_alpha(alpha0 + d, basis)
        q = q_probability(rho, probe, basis)
        pred = gaussian_q_prediction(probe, base, basis)
        worst = max(worst, abs(q - pred) / pred)
        qmin = min(qmin, q)
    return GaussianQReport(float(worst), probes, float(qmin))


# -------------------------------------------------------- reachability gap

@dataclass(frozen=True)
class GapReport:
    e_quantum: float
    e_coherent_min: float
    gap: float
    alpha_min: tuple[complex, ...]
    converged: bool

    def as_dict(self) -> dict:
        return {"e_quantum": self.e_quantum, "e_coherent_min": self.e_coherent_min,
                "gap": self.gap, "alpha_min_re": [a.real for a in self.alpha_min],
                "alpha_min_im": [a.imag for a in self.alpha_min], "converged": self.converged}


def coherent_energy(hn: OperatorMatrix, fock: FockSpec, alpha) -> float:
    vec = coherent_from_alpha(alpha, fock, warn=False).vector
    return hn.expect_vector(vec).real


def _central_gradient(f, x, h):
    g = np.empty_like(x)
    for i in range(len(x)):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (f(x + e) - f(x - e)) / (2 * h)
    return g


def reachability_gap(hn: OperatorMatrix, fock: FockSpec, restarts: int = 16, seed: int = 0,
                     fd_step: float = 1e-5, start_scale: float = 1.0) -> GapReport:
    """Quantum ground energy vs the best coherent-state energy <alpha|H_n|alpha>.

    Multi-start L-BFGS-B over (Re alpha, Im alpha) with central finite
    differences. The first start is alpha = 0; the others are drawn from
    N(0, start_scale^2). Each real coordinate is boxed to |x| <= sqrt(n_max)/2
    so the truncated coherent states stay meaningful.
    """
    if hn.dim != fock.dim:
        raise ValueError("operator and Fock spec dimensions differ")
    e_quantum, _ = ground_state(hn)
    M = fock.modes
    rng = np.random.default_rng(seed)
    bound = 0.5 * np.sqrt(fock.n_max)

    def f(x):
        return coherent_energy(hn, fock, x[:M] + 1j * x[M:])

    results = []
    for r in range(max(restarts, 1)):
        x0 = np.zeros(2 * M) if r == 0 else np.clip(start_scale * rng.standard_normal(2 * M),
                                                    -bound, bound)
        res = scipy.optimize.minimize(f, x0, jac=lambda x: _central_gradient(f, x, fd_step),
                                      method="L-BFGS-B", bounds=[(-bound, bound)] * (2 * M),
                                      options={"ftol": 1e-15, "gtol": 1e-10, "maxiter": 500})
        results.append((float(res.fun), tuple(np.round(res.x, 12)), bool(res.success), res.x))
    results.sort(key=lambda t: (t[0], t[1]))
    best = results[0]
    alpha = best[3][:M] + 1j * best[3][M:]
    converged = any(r[2] for r in results)
    if not converged:
        warnings.warn("coherent minimization did not converge from any start", RuntimeWarning)
    return GapReport(float(e_quantum), best[0], best[0] - float(e_quantum),
                     tuple(complex(a) for a in alpha), converged)
