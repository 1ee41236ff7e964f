"""Classical lattice field theory in 1+1 dimensions with optional white-noise sources."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Sequence

import numpy as np

POTENTIALS = ("free", "phi4", "sine-gordon")


@dataclass(frozen=True)
class LatticeSpec:
    sites: int
    spacing: float = 1.0

    def __post_init__(self):
        if self.sites < 2:
            raise ValueError(f"lattice needs at least 2 sites, got {self.sites}")
        if not self.spacing > 0:
            raise ValueError(f"spacing must be positive, got {self.spacing}")

    @property
    def length(self) -> float:
        return self.sites * self.spacing

    @property
    def positions(self) -> np.ndarray:
        return self.spacing * np.arange(self.sites)


@dataclass(frozen=True, eq=False)
class FieldState:
    """Field values phi[j, x] and momenta pi[j, x] on a periodic lattice.

    ``twist[j]`` is the boundary jump phi_j(L) = phi_j(0) + twist[j]. It is
    zero for ordinary periodic states; a sine-Gordon kink carries one period
    of the potential so the winding survives periodic wrap-around.
    """

    phi: np.ndarray
    pi: np.ndarray
    twist: np.ndarray | None = None

    def __post_init__(self):
        phi = np.atleast_2d(np.array(self.phi, dtype=float))
        pi = np.atleast_2d(np.array(self.pi, dtype=float))
        if phi.shape != pi.shape:
            raise ValueError(f"phi {phi.shape} and pi {pi.shape} shapes differ")
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(pi))):
            raise ValueError("non-finite field values")
        twist = np.zeros(phi.shape[0]) if self.twist is None else np.array(self.twist, dtype=float)
        if twist.shape != (phi.shape[0],):
            raise ValueError("one twist value per component required")
        for arr in (phi, pi, twist):
            arr.flags.writeable = False
        object.__setattr__(self, "phi", phi)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "twist", twist)

    @property
    def components(self) -> int:
        return self.phi.shape[0]

    @property
    def sites(self) -> int:
        return self.phi.shape[1]

    def __eq__(self, other):
        if not isinstance(other, FieldState):
            return NotImplemented
        return (np.array_equal(self.phi, other.phi) and np.array_equal(self.pi, other.pi)
                and np.array_equal(self.twist, other.twist))

    def time_reversed(self) -> "FieldState":
        return FieldState(self.phi, -self.pi, self.twist)


@dataclass(frozen=True)
class FieldModel:
    """Lattice Hamiltonian with per-component masses and one potential.

    Potentials (``coupling`` is lambda):

    * ``free``: no interaction.
    * ``phi4``: (lambda/4) (sum_j phi_j^2)^2 on top of the mass terms.
    * ``sine-gordon``: total on-site potential (m^4/lambda)(1 - cos(sqrt(lambda) phi/m))
      per component; the mass term is its quadratic part, so the interaction
      is that potential minus m^2 phi^2 / 2.
    """

    masses: tuple[float, ...]
    lattice: LatticeSpec
    potential: str = "free"
    coupling: float = 0.0

    def __post_init__(self):
        masses = tuple(float(m) for m in np.atleast_1d(self.masses))
        object.__setattr__(self, "masses", masses)
        if self.potential not in POTENTIALS:
            raise ValueError(f"unknown potential {self.potential!r}; choose from {POTENTIALS}")
        if any(m < 0 or not np.isfinite(m) for m in masses):
            raise ValueError(f"masses must be finite and >= 0, got {masses}")
        if self.coupling < 0 or not np.isfinite(self.coupling):
            raise ValueError(f"coupling must be finite and >= 0, got {self.coupling}")
        if self.potential == "sine-gordon":
            if self.coupling <= 0 or any(m <= 0 for m in masses):
                raise ValueError("sine-gordon needs positive masses and coupling")

    @property
    def components(self) -> int:
        return len(self.masses)

    @property
    def mass_array(self) -> np.ndarray:
        return np.array(self.masses)[:, None]

    def sg_period(self, component: int = 0) -> float:
        """Field period 2*pi*m/sqrt(lambda) of the sine-Gordon potential."""
        return 2 * np.pi * self.masses[component] / np.sqrt(self.coupling)

    def interaction(self, phi: np.ndarray) -> np.ndarray:
        """On-site interaction density per site (summed over components)."""
        if self.potential == "free":
            return np.zeros(phi.shape[1])
        if self.potential == "phi4":
            return 0.25 * self.coupling * np.sum(phi**2, axis=0) ** 2
        m = self.mass_array
        g = np.sqrt(self.coupling)
        # 1 - cos(x) written as 2 sin^2(x/2) to keep small-amplitude precision
        full = (m**4 / self.coupling) * 2 * np.sin(g * phi / (2 * m)) ** 2
        return np.sum(full - 0.5 * m**2 * phi**2, axis=0)

    def interaction_force(self, phi: np.ndarray) -> np.ndarray:
        """-dV/dphi per site and component."""
        if self.potential == "free":
            return np.zeros_like(phi)
        if self.potential == "phi4":
            return -self.coupling * np.sum(phi**2, axis=0) * phi
        m = self.mass_array
        g = np.sqrt(self.coupling)
        return -(m**3 / g) * np.sin(g * phi / m) + m**2 * phi


def _check_shapes(state: FieldState, model: FieldModel):
    if state.components != model.components or state.sites != model.lattice.sites:
        raise ValueError(
            f"state shape {(state.components, state.sites)} does not match model "
            f"{(model.components, model.lattice.sites)}")


def forward_gradient(phi: np.ndarray, twist: np.ndarray, spacing: float) -> np.ndarray:
    nxt = np.roll(phi, -1, axis=1)
    nxt[:, -1] += twist
    return (nxt - phi) / spacing


def classical_energy(state: FieldState, model: FieldModel) -> float:
    _check_shapes(state, model)
    a = model.lattice.spacing
    grad = forward_gradient(state.phi, state.twist, a)
    density = (0.5 * state.pi**2 + 0.5 * grad**2 + 0.5 * model.mass_array**2 * state.phi**2)
    return float(a * (density.sum() + model.interaction(state.phi).sum()))


def force(phi: np.ndarray, twist: np.ndarray, model: FieldModel) -> np.ndarray:
    """Per-site force -(1/a) dE/dphi of the discrete energy."""
    a = model.lattice.spacing
    nxt = np.roll(phi, -1, axis=1)
    nxt[:, -1] += twist[:]
    prv = np.roll(phi, 1, axis=1)
    prv[:, 0] -= twist[:]
    lap = (nxt - 2 * phi + prv) / a**2
    return lap - model.mass_array**2 * phi + model.interaction_force(phi)


class IntegrationError(RuntimeError):
    def __init__(self, step: int):
        super().__init__(f"non-finite field values at step {step}")
        self.step = step


def _kdk(phi, pi, twist, model, dt, source=None):
    # overflow surfaces as IntegrationError in the callers
    with np.errstate(over="ignore", invalid="ignore"):
        return _kdk_raw(phi, pi, twist, model, dt, source)


def _kdk_raw(phi, pi, twist, model, dt, source):
    f = force(phi, twist, model)
    if source is not None:
        f = f + source
    pi = pi + 0.5 * dt * f
    phi = phi + dt * pi
    f = force(phi, twist, model)
    if source is not None:
        f = f + source
    pi = pi + 0.5 * dt * f
    return phi, pi


def leapfrog_step(state: FieldState, model: FieldModel, dt: float) -> FieldState:
    """One kick-drift-kick step of the Hamiltonian flow."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    _check_shapes(state, model)
    phi, pi = _kdk(state.phi, state.pi, state.twist, model, dt)
    if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(pi))):
        raise IntegrationError(1)
    return FieldState(phi, pi, state.twist)


def evolve(state: FieldState, model: FieldModel, dt: float, steps: int,
           record_every: int = 0) -> tuple[FieldState, list[FieldState]]:
    """Run ``steps`` leapfrog steps; optionally record every n-th state."""
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    _check_shapes(state, model)
    phi, pi, twist = state.phi, state.pi, state.twist
    record = [state] if record_every else []
    for k in range(1, steps + 1):
        phi, pi = _kdk(phi, pi, twist, model, dt)
        if record_every and k % record_every == 0:
            if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(pi))):
                raise IntegrationError(k)
            record.append(FieldState(phi, pi, twist))
    if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(pi))):
        raise IntegrationError(steps)
    return FieldState(phi, pi, twist), record


@dataclass(frozen=True)
class NoiseSpec:
    """Gaussian white-noise sources on ``len(sigma)`` driven components.

    ``driven`` lists which field components receive a source; by default the
    first m components.
    """

    sigma: np.ndarray
    seed: int = 0
    driven: tuple[int, ...] | None = None

    def __post_init__(self):
        sigma = np.atleast_2d(np.array(self.sigma, dtype=float))
        if sigma.size == 0:
            sigma = np.zeros((0, 0))
        if sigma.shape[0] != sigma.shape[1]:
            raise ValueError(f"covariance must be square, got {sigma.shape}")
        if sigma.size and np.abs(sigma - sigma.T).max() > 1e-12:
            raise ValueError("covariance is not symmetric")
        if sigma.size:
            evals = np.linalg.eigvalsh(sigma)
            if evals.min() < -1e-12 * max(1.0, np.abs(evals).max()):
                raise ValueError(f"covariance is not PSD (min eigenvalue {evals.min():.3e})")
        sigma.flags.writeable = False
        object.__setattr__(self, "sigma", sigma)
        driven = tuple(range(sigma.shape[0])) if self.driven is None else tuple(self.driven)
        if len(driven) != sigma.shape[0] or len(set(driven)) != len(driven):
            raise ValueError("driven must list one distinct component per source")
        object.__setattr__(self, "driven", driven)

    @property
    def m_sources(self) -> int:
        return self.sigma.shape[0]

    def factor(self) -> np.ndarray:
        """Matrix F with F F^T = sigma (eigen-factorization; tolerates singular sigma)."""
        if self.m_sources == 0:
            return np.zeros((0, 0))
        evals, evecs = np.linalg.eigh(self.sigma)
        return evecs * np.sqrt(np.clip(evals, 0, None))


@dataclass(frozen=True, eq=False)
class NoiseBlock:
    """Source values s[k, i, x] for step k, driven component i, site x."""

    values: np.ndarray
    driven: tuple[int, ...]
    dt: float

    @property
    def steps(self) -> int:
        return self.values.shape[0]

    def reversed(self) -> "NoiseBlock":
        return NoiseBlock(self.values[::-1].copy(), self.driven, self.dt)

    def source(self, k: int, components: int) -> np.ndarray:
        out = np.zeros((components, self.values.shape[2]))
        out[list(self.driven)] = self.values[k]
        return out


def sample_noise_block(spec: NoiseSpec, lattice: LatticeSpec, steps: int, dt: float) -> NoiseBlock:
    """Draw i.i.d. N(0, sigma)/sqrt(a dt) sources for every site and step."""
    if steps < 1:
        raise ValueError("steps must be >= 1")
    if not dt > 0:
        raise ValueError("dt must be positive")
    shape = (steps, spec.m_sources, lattice.sites)
    if spec.m_sources == 0 or not np.any(spec.sigma):
        return NoiseBlock(np.zeros(shape), spec.driven, dt)
    rng = np.random.default_rng(spec.seed)
    z = rng.standard_normal(shape)
    values = np.einsum("ij,kjx->kix", spec.factor(), z) / np.sqrt(lattice.spacing * dt)
    return NoiseBlock(values, spec.driven, dt)


def integrate_with_sources(state: FieldState, model: FieldModel, noise: NoiseBlock, dt: float,
                           steps: int | None = None, record_every: int = 1) -> list[FieldState]:
    """Leapfrog with the step-k source added to the force of each driven component.

    Returns the recorded trajectory, starting with the initial state.
    """
    _check_shapes(state, model)
    steps = noise.steps if steps is None else steps
    if steps != noise.steps:
        raise ValueError(f"noise block has {noise.steps} steps, requested {steps}")
    if dt != noise.dt:
        raise ValueError(f"noise block drawn for dt={noise.dt}, integrating with dt={dt}")
    if max(noise.driven, default=-1) >= model.components:
        raise ValueError("noise drives a component the model does not have")
    phi, pi, twist = state.phi, state.pi, state.twist
    silent = not np.any(noise.values)
    traj = [state]
    for k in range(steps):
        src = None if silent else noise.source(k, model.components)
        phi, pi = _kdk(phi, pi, twist, model, dt, src)
        if not (np.all(np.isfinite(phi)) and np.all(np.isfinite(pi))):
            raise IntegrationError(k + 1)
        if record_every and (k + 1) % record_every == 0:
            traj.append(FieldState(phi, pi, twist))
    if not record_every or steps % record_every:
        traj.append(FieldState(phi, pi, twist))
    return traj


def reversed_replay(final: FieldState, model: FieldModel, noise: NoiseBlock, dt: float) -> FieldState:
    """Flip momenta, integrate with the time-reversed noise, flip back."""
    traj = integrate_with_sources(final.time_reversed(), model, noise.reversed(), dt, record_every=0)
    return traj[-1].time_reversed()


def lattice_frequency(mass: float, momentum, spacing: float):
    """Dispersion sqrt(m^2 + (2/a)^2 sin^2(p a/2)) of the forward-difference lattice."""
    return np.sqrt(mass**2 + (2.0 / spacing * np.sin(0.5 * np.asarray(momentum) * spacing)) ** 2)


def sine_gordon_kink(x, mass: float, coupling: float, center: float = 0.0):
    """(4m/sqrt(lambda)) arctan(exp(m (x - center))); energy 8 m^3/lambda."""
    return 4 * mass / np.sqrt(coupling) * np.arctan(np.exp(mass * (np.asarray(x) - center)))


def make_initial_state(kind: str, model: FieldModel, **params) -> FieldState:
    """Named initial configurations.

    kind:
      ``vacuum``
      ``kink``: sine-Gordon kink on every component, ``center`` (default: lattice middle)
      ``plane-wave``: ``k`` (momentum), ``amplitude``, optional ``component``;
          right-moving wave phi = A cos(kx), pi = A w sin(kx) with the lattice w
      ``gaussian-random``: ``sigma``, ``seed``; i.i.d. N(0, sigma^2) phi and pi
    """
    lat = model.lattice
    n, L = model.components, lat.sites
    x = lat.positions
    if kind == "vacuum":
        return FieldState(np.zeros((n, L)), np.zeros((n, L)))
    if kind == "kink":
        if model.potential != "sine-gordon":
            raise ValueError("kink requires a sine-gordon model")
        center = params.get("center", 0.5 * lat.length)
        phi = np.stack([sine_gordon_kink(x, m, model.coupling, center) for m in model.masses])
        twist = [model.sg_period(j) for j in range(n)]
        return FieldState(phi, np.zeros((n, L)), twist)
    if kind == "plane-wave":
        k, amp = float(params["k"]), float(params["amplitude"])
        j = int(params.get("component", 0))
        w = lattice_frequency(model.masses[j], k, lat.spacing)
        phi, pi = np.zeros((n, L)), np.zeros((n, L))
        phi[j] = amp * np.cos(k * x)
        pi[j] = amp * w * np.sin(k * x)
        return FieldState(phi, pi)
    if kind == "gaussian-random":
        sigma = float(params["sigma"])
        rng = np.random.default_rng(int(params["seed"]))
        return FieldState(sigma * rng.standard_normal((n, L)), sigma * rng.standard_normal((n, L)))
    raise ValueError(f"unknown initial state kind {kind!r}")


def plane_wave_energy(model: FieldModel, k: float, amplitude: float, component: int = 0) -> float:
    """Closed-form energy L a A^2 w^2 / 2 of the plane wave from make_initial_state."""
    lat = model.lattice
    w = lattice_frequency(model.masses[component], k, lat.spacing)
    return 0.5 * lat.length * amplitude**2 * w**2


def write_trajectory_csv(path, trajectory: Sequence[FieldState], dt: float,
                         steps: Sequence[int] | None = None, model: FieldModel | None = None,
                         summary: bool = False) -> None:
    """Write (step, t, site, component, phi, pi) rows, or (step, t, energy) when ``summary``."""
    steps = range(len(trajectory)) if steps is None else steps
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if summary:
            if model is None:
                raise ValueError("summary export needs the model for energies")
            w.writerow(["step", "t", "energy"])
            for k, s in zip(steps, trajectory):
                w.writerow([k, repr(float(k * dt)), repr(float(classical_energy(s, model)))])
            return
        w.writerow(["step", "t", "site", "component", "phi", "pi"])
        for k, s in zip(steps, trajectory):
            for j in range(s.components):
                for x in range(s.sites):
                    w.writerow([k, repr(float(k * dt)), x, j,
                                repr(float(s.phi[j, x])), repr(float(s.pi[j, x]))])
