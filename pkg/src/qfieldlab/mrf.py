"""Finite-state space-time lattices: forward Markov process vs Markov random field.

Lattice arrays have shape (nx, nt); space is periodic, time is open. A
configuration's flat index is little-endian over the C-order flattening of
the (nx, nt) array: index = sum_i s.ravel()[i] * q**i.

* MP: the t=0 slice comes from an initial distribution; every later site is
  drawn from f(s | left, centre, right parents at t-1).
* MRF: Pr(config) is proportional to the product of a pairwise potential over every
  nearest-neighbour edge (spatial and temporal), with optional clamped
  values on the first and last time slices.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

MAX_ENUMERATION = 2**20


def spatial_edges(nx: int) -> list[tuple[int, int]]:
    """Periodic nearest-neighbour pairs (x, x+1); each unordered pair once."""
    if nx > 2:
        return [(x, (x + 1) % nx) for x in range(nx)]
    return [(0, 1)] if nx == 2 else []


def config_index(configs: np.ndarray, q: int) -> np.ndarray:
    """Flat indices of (K, nx, nt) configurations."""
    flat = configs.reshape(len(configs), -1).astype(np.int64)
    return flat @ (q ** np.arange(flat.shape[1], dtype=np.int64))


def decode_index(index, q: int, nx: int, nt: int) -> np.ndarray:
    index = np.atleast_1d(np.asarray(index, dtype=np.int64))
    n = nx * nt
    digits = (index[:, None] // q ** np.arange(n, dtype=np.int64)) % q
    return digits.reshape(len(index), nx, nt)


@dataclass(frozen=True)
class LatticeSample:
    states: np.ndarray  # (nx, nt)
    sampler: str
    seed: int
    sweeps: int = 0


@dataclass(frozen=True, eq=False)
class ExactJoint:
    """Exact distribution over an enumerated support."""

    configs: np.ndarray  # (K, nx, nt)
    probs: np.ndarray  # (K,)
    q: int
    log_partition: float = 0.0

    @property
    def indices(self) -> np.ndarray:
        return config_index(self.configs, self.q)

    def dense(self) -> np.ndarray:
        """Probability vector over all q**(nx*nt) configurations."""
        n = self.configs.shape[1] * self.configs.shape[2]
        if self.q**n > MAX_ENUMERATION:
            raise ValueError("full configuration space too large for a dense vector")
        out = np.zeros(self.q**n)
        out[self.indices] = self.probs
        return out

    def marginals(self) -> np.ndarray:
        """Single-site marginals, shape (nx, nt, q)."""
        onehot = self.configs[..., None] == np.arange(self.q)
        return np.einsum("k,kxts->xts", self.probs, onehot)


def _sparse_tv(idx1, p1, idx2, p2) -> float:
    allidx = np.union1d(idx1, idx2)
    a = np.zeros(len(allidx))
    b = np.zeros(len(allidx))
    a[np.searchsorted(allidx, idx1)] = p1
    b[np.searchsorted(allidx, idx2)] = p2
    return 0.5 * float(np.abs(a - b).sum())


def total_variation(joint: ExactJoint, samples: np.ndarray) -> float:
    """TV distance between an exact joint and the empirical law of (N, nx, nt) samples."""
    idx, counts = np.unique(config_index(samples, joint.q), return_counts=True)
    return _sparse_tv(joint.indices, joint.probs, idx, counts / counts.sum())


def empirical_marginals(samples: np.ndarray, q: int) -> np.ndarray:
    return (samples[..., None] == np.arange(q)).mean(axis=0)


# ------------------------------------------------------------------ MRF

@dataclass(frozen=True, eq=False)
class MRFModel:
    nx: int
    nt: int
    q: int
    edge_potential: np.ndarray
    temporal_potential: np.ndarray | None = None
    boundary_start: np.ndarray | None = None
    boundary_end: np.ndarray | None = None

    def __post_init__(self):
        if self.nx < 1 or self.nt < 1 or self.q < 2:
            raise ValueError("need nx >= 1, nt >= 1, q >= 2")
        psi = np.array(self.edge_potential, dtype=float)
        psi_t = psi if self.temporal_potential is None else np.array(self.temporal_potential, dtype=float)
        for name, p in (("edge_potential", psi), ("temporal_potential", psi_t)):
            if p.shape != (self.q, self.q):
                raise ValueError(f"{name} must be {self.q}x{self.q}")
            if np.any(p <= 0) or not np.all(np.isfinite(p)):
                raise ValueError(f"{name} entries must be finite and > 0")
        object.__setattr__(self, "edge_potential", psi)
        object.__setattr__(self, "temporal_potential", psi_t)
        for name in ("boundary_start", "boundary_end"):
            b = getattr(self, name)
            if b is not None:
                b = np.array(b, dtype=np.int64)
                if b.shape != (self.nx,) or b.min() < 0 or b.max() >= self.q:
                    raise ValueError(f"{name} must hold {self.nx} values in [0, {self.q})")
                object.__setattr__(self, name, b)
        if self.nt == 1 and self.boundary_start is not None and self.boundary_end is not None:
            if not np.array_equal(self.boundary_start, self.boundary_end):
                raise ValueError("nt=1 with conflicting start and end clamps")

    @property
    def clamped(self) -> np.ndarray:
        """(nx, nt) mask of clamped sites."""
        mask = np.zeros((self.nx, self.nt), dtype=bool)
        if self.boundary_start is not None:
            mask[:, 0] = True
        if self.boundary_end is not None:
            mask[:, -1] = True
        return mask

    def apply_clamps(self, states: np.ndarray) -> np.ndarray:
        if self.boundary_start is not None:
            states[..., :, 0] = self.boundary_start
        if self.boundary_end is not None:
            states[..., :, -1] = self.boundary_end
        return states

    def reflected(self) -> "MRFModel":
        """Same model with time run backwards (temporal potential transposed)."""
        return MRFModel(self.nx, self.nt, self.q, self.edge_potential,
                        self.temporal_potential.T, self.boundary_end, self.boundary_start)

    def log_weight(self, configs: np.ndarray) -> np.ndarray:
        """Sum of log-potentials for (K, nx, nt) configurations.

        Computed from integer edge-type counts so that reflection-symmetric
        models give bit-identical weights for mirrored configurations.
        """
        q = self.q
        c = configs.astype(np.int64)
        sp_codes = [c[:, x1, :] * q + c[:, x2, :] for x1, x2 in spatial_edges(self.nx)]
        t_codes = c[:, :, :-1] * q + c[:, :, 1:]
        K = len(c)
        sp_counts = np.zeros((K, q * q), dtype=np.int64)
        for codes in sp_codes:
            sp_counts += _code_counts(codes.reshape(K, -1), q * q)
        t_counts = _code_counts(t_codes.reshape(K, -1), q * q)
        log_s = np.log(self.edge_potential).ravel()
        log_t = np.log(self.temporal_potential)
        if np.array_equal(log_t, log_t.T):
            # fold (s, s') and (s', s) so the sum is invariant under time reflection
            t3 = t_counts.reshape(K, q, q)
            t3 = t3 + np.transpose(t3, (0, 2, 1)) - np.einsum("kii->ki", t3)[:, :, None] * np.eye(q, dtype=np.int64)
            t_counts = np.triu(np.ones((q, q), dtype=np.int64))[None] * t3
            t_counts = t_counts.reshape(K, q * q)
        # fixed summation order
        return sp_counts.astype(float) @ log_s + t_counts.astype(float) @ log_t.ravel()


def _code_counts(codes: np.ndarray, n_codes: int) -> np.ndarray:
    K = codes.shape[0]
    out = np.zeros((K, n_codes), dtype=np.int64)
    rows = np.repeat(np.arange(K), codes.shape[1])
    np.add.at(out, (rows, codes.ravel()), 1)
    return out


def mrf_exact(model: MRFModel, chunk: int = 2**15) -> ExactJoint:
    """Enumerate every free configuration and normalize the Gibbs weights."""
    free = ~model.clamped
    n_free = int(free.sum())
    if model.q**n_free > MAX_ENUMERATION:
        raise ValueError(f"{model.q}^{n_free} free configurations exceed {MAX_ENUMERATION}")
    total = model.q**n_free
    configs = np.empty((total, model.nx, model.nt), dtype=np.int8)
    logw = np.empty(total)
    for start in range(0, total, chunk):
        stop = min(start + chunk, total)
        idx = np.arange(start, stop, dtype=np.int64)
        digits = (idx[:, None] // model.q ** np.arange(n_free, dtype=np.int64)) % model.q
        block = np.zeros((stop - start, model.nx, model.nt), dtype=np.int8)
        block[:, free] = digits
        model.apply_clamps(block)
        configs[start:stop] = block
        logw[start:stop] = model.log_weight(block)
    top = logw.max()
    w = np.exp(logw - top)
    z = w.sum()
    return ExactJoint(configs, w / z, model.q, float(top + np.log(z)))


def _site_terms(model: MRFModel):
    """Per free site: list of (neighbour (x, t), log-table, role) for incident edges."""
    log_s = np.log(model.edge_potential)
    log_t = np.log(model.temporal_potential)
    terms = {}
    for x in range(model.nx):
        for t in range(model.nt):
            rows = []
            for x1, x2 in spatial_edges(model.nx):
                if x1 == x:
                    rows.append(((x2, t), log_s, 0))  # site is first argument
                if x2 == x:
                    rows.append(((x1, t), log_s, 1))
            if t + 1 < model.nt:
                rows.append(((x, t + 1), log_t, 0))
            if t > 0:
                rows.append(((x, t - 1), log_t, 1))
            terms[(x, t)] = rows
    return terms


def mrf_gibbs_run(model: MRFModel, sweeps: int, burn_in: int, seed: int,
                  chains: int = 1) -> np.ndarray:
    """Raster-order single-site Gibbs sampling on ``chains`` independent chains.

    Returns the (chains * sweeps, nx, nt) states recorded after each
    post-burn-in sweep. The raster order is t-major then x.
    """
    rng = np.random.default_rng(seed)
    state = rng.integers(0, model.q, size=(chains, model.nx, model.nt))
    model.apply_clamps(state)
    free = ~model.clamped
    order = [(x, t) for t in range(model.nt) for x in range(model.nx) if free[x, t]]
    terms = _site_terms(model)
    out = np.empty((sweeps, chains, model.nx, model.nt), dtype=np.int8)
    for sweep in range(burn_in + sweeps):
        for x, t in order:
            logits = np.zeros((chains, model.q))
            for (nx_, nt_), table, role in terms[(x, t)]:
                nb = state[:, nx_, nt_]
                logits += table[:, nb].T if role == 0 else table[nb, :]
            logits -= logits.max(axis=1, keepdims=True)
            p = np.exp(logits)
            cdf = np.cumsum(p, axis=1)
            u = rng.random(chains) * cdf[:, -1]
            state[:, x, t] = np.minimum((cdf < u[:, None]).sum(axis=1), model.q - 1)
        if sweep >= burn_in:
            out[sweep - burn_in] = state
    return out.transpose(1, 0, 2, 3).reshape(chains * sweeps, model.nx, model.nt)


def mrf_gibbs_sample(model: MRFModel, sweeps: int, burn_in: int, seed: int) -> LatticeSample:
    """Final state of one Gibbs chain after ``burn_in + sweeps`` sweeps."""
    run = mrf_gibbs_run(model, max(sweeps, 1), burn_in, seed, chains=1)
    return LatticeSample(run[-1].astype(np.int64), "mrf-gibbs", seed, burn_in + sweeps)


def single_site_conditional(model: MRFModel, states: np.ndarray, x: int, t: int) -> np.ndarray:
    """Normalized Gibbs conditional at (x, t) given the rest of one (nx, nt) state."""
    logits = np.zeros(model.q)
    for (xn, tn), table, role in _site_terms(model)[(x, t)]:
        nb = states[xn, tn]
        logits += table[:, nb] if role == 0 else table[nb, :]
    p = np.exp(logits - logits.max())
    return p / p.sum()


# ------------------------------------------------------------------- MP

@dataclass(frozen=True, eq=False)
class MPModel:
    """Forward Markov process with transition f[left, centre, right, s]."""

    nx: int
    nt: int
    q: int
    transition: np.ndarray
    initial: np.ndarray

    def __post_init__(self):
        f = np.array(self.transition, dtype=float)
        q = self.q
        if f.shape != (q, q, q, q):
            raise ValueError(f"transition must have shape {(q,) * 4}")
        if np.any(f < 0) or np.abs(f.sum(axis=-1) - 1).max() > 1e-12:
            raise ValueError("transition rows must be probability vectors")
        init = np.array(self.initial, dtype=float)
        if init.shape != (q**self.nx,):
            raise ValueError(f"initial distribution needs {q ** self.nx} entries")
        if np.any(init < 0) or abs(init.sum() - 1) > 1e-12:
            raise ValueError("initial distribution must be a probability vector")
        object.__setattr__(self, "transition", f)
        object.__setattr__(self, "initial", init)

    @staticmethod
    def product_initial(marginal, nx: int) -> np.ndarray:
        """Initial slice distribution with i.i.d. sites (index little-endian in x)."""
        out = np.ones(1)
        for _ in range(nx):
            out = np.kron(np.asarray(marginal, dtype=float), out)
        return out


def _parents(nx: int):
    x = np.arange(nx)
    return (x - 1) % nx, x, (x + 1) % nx


def mp_sample_many(model: MPModel, n: int, seed: int) -> np.ndarray:
    """n independent forward samples, shape (n, nx, nt)."""
    rng = np.random.default_rng(seed)
    q, nx = model.q, model.nx
    out = np.empty((n, nx, model.nt), dtype=np.int8)
    first = rng.choice(q**nx, size=n, p=model.initial)
    out[:, :, 0] = (first[:, None] // q ** np.arange(nx)) % q
    left, centre, right = _parents(nx)
    for t in range(1, model.nt):
        prev = out[:, :, t - 1].astype(np.int64)
        probs = model.transition[prev[:, left], prev[:, centre], prev[:, right]]  # (n, nx, q)
        cdf = np.cumsum(probs, axis=-1)
        u = rng.random((n, nx))[..., None] * cdf[..., -1:]
        out[:, :, t] = np.minimum((cdf < u).sum(axis=-1), q - 1)
    return out


def mp_sample(model: MPModel, seed: int) -> LatticeSample:
    return LatticeSample(mp_sample_many(model, 1, seed)[0].astype(np.int64), "mp-forward", seed)


def mp_exact(model: MPModel) -> ExactJoint:
    """Chain-rule product over slices for every configuration."""
    n = model.nx * model.nt
    total = model.q**n
    if total > MAX_ENUMERATION:
        raise ValueError(f"{model.q}^{n} configurations exceed {MAX_ENUMERATION}")
    configs = decode_index(np.arange(total), model.q, model.nx, model.nt).astype(np.int8)
    c = configs.astype(np.int64)
    slice0 = c[:, :, 0] @ (model.q ** np.arange(model.nx))
    p = model.initial[slice0].copy()
    left, centre, right = _parents(model.nx)
    for t in range(1, model.nt):
        prev = c[:, :, t - 1]
        f = model.transition[prev[:, left], prev[:, centre], prev[:, right], c[:, :, t]]
        p *= f.prod(axis=1)
    keep = p > 0
    return ExactJoint(configs[keep], p[keep], model.q)


# ----------------------------------------------------------- reflection

@dataclass(frozen=True)
class ReflectionReport:
    tv_distance: float
    support: int

    def as_dict(self) -> dict:
        return {"tv_distance": self.tv_distance, "support": self.support}


def time_reflection_report(model: MRFModel | MPModel) -> ReflectionReport:
    """TV distance between the exact joint and its t -> nt-1-t mirror image."""
    joint = mrf_exact(model) if isinstance(model, MRFModel) else mp_exact(model)
    idx = joint.indices
    ridx = config_index(joint.configs[:, :, ::-1], joint.q)
    return ReflectionReport(_sparse_tv(idx, joint.probs, ridx, joint.probs), len(idx))


# ---------------------------------------------- MP realizability search

def symmetric_binary_mp(nx: int, nt: int, params) -> MPModel:
    """Binary MP with f(1 | l, c, r) = params[(l + r) + 3 c] and i.i.d. slice 0 with P(1) = params[6]."""
    params = np.asarray(params, dtype=float)
    f = np.empty((2, 2, 2, 2))
    for l, c, r in itertools.product(range(2), repeat=3):
        p1 = params[(l + r) + 3 * c]
        f[l, c, r] = (1 - p1, p1)
    init = MPModel.product_initial([1 - params[6], params[6]], nx)
    return MPModel(nx, nt, 2, f, init)


def mp_realizability_search(target: ExactJoint, nx: int, nt: int, grid) -> dict:
    """Smallest TV between ``target`` and any grid point of :func:`symmetric_binary_mp`.

    Exhaustive over ``len(grid)**7`` parameter vectors. A strictly positive
    minimum says no model on the grid reproduces the target joint.
    """
    if target.q != 2:
        raise ValueError("search is defined for binary lattices")
    grid = np.asarray(grid, dtype=float)
    total = 2 ** (nx * nt)
    configs = decode_index(np.arange(total), 2, nx, nt).astype(np.int64)
    # slot counts: how often each parameter appears with outcome 1 / 0
    ones = np.zeros((total, 7))
    zeros = np.zeros((total, 7))
    left, centre, right = _parents(nx)
    ones[:, 6] = configs[:, :, 0].sum(axis=1)
    zeros[:, 6] = nx - ones[:, 6]
    for t in range(1, nt):
        prev = configs[:, :, t - 1]
        slot = (prev[:, left] + prev[:, right]) + 3 * prev[:, centre]
        s = configs[:, :, t]
        for k in range(6):
            hit = slot == k
            ones[:, k] += (hit & (s == 1)).sum(axis=1)
            zeros[:, k] += (hit & (s == 0)).sum(axis=1)
    target_dense = target.dense()
    best_tv, best_params = np.inf, None
    all_params = np.array(list(itertools.product(grid, repeat=7)))
    for start in range(0, len(all_params), 4096):
        P = all_params[start:start + 4096]
        logp = ones @ np.log(P).T + zeros @ np.log1p(-P).T  # (total, batch)
        tv = 0.5 * np.abs(np.exp(logp) - target_dense[:, None]).sum(axis=0)
        i = int(np.argmin(tv))
        if tv[i] < best_tv:
            best_tv, best_params = float(tv[i]), P[i].tolist()
    return {"min_tv": best_tv, "best_params": best_params, "grid_points": len(all_params)}
