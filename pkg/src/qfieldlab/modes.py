"""Momentum-mode basis and the field <-> mode-amplitude transforms.

For component j and lattice momentum p_k = 2 pi k / (L a) the amplitudes are

    theta_j(p) = sqrt(w_j(p)) * phi~_j(p),   tau_j(p) = pi~_j(p) / sqrt(w_j(p)),
    phi~(p)    = (a / sqrt(L a)) sum_y exp(-i p y) phi(y),

and the coherent amplitude is alpha = (theta + i tau) / sqrt(2). The
transform is unitary (Parseval holds exactly), so with the lattice
dispersion the free lattice energy equals sum_p w(p) |alpha(p)|^2.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .classical import FieldState, LatticeSpec, lattice_frequency
from .fock import FockSpec

COHERENT_SCALE = 1 / np.sqrt(2)
DISPERSIONS = ("lattice", "continuum")


def signed_wavenumber(k: int, sites: int) -> int:
    """Map k to the representative in (-L/2, L/2]."""
    k = k % sites
    return k - sites if k > sites // 2 else k


def _closed_groups(components: int, sites: int):
    """Mode groups {(j, k), (j, -k)} ordered by |k| then component."""
    groups = []
    for k in range(sites // 2 + 1):
        for j in range(components):
            ks = {signed_wavenumber(k, sites), signed_wavenumber(-k, sites)}
            groups.append(tuple(sorted(((j, kk) for kk in ks), key=lambda t: (t[1] < 0, abs(t[1])))))
    return groups


@dataclass(frozen=True)
class ModeBasis:
    """Lattice momenta, frequencies and the (component, k) -> Fock mode binding.

    ``modes[i] = (j, k)`` means Fock mode i carries component j at signed
    wavenumber k. The selection must be closed under k -> -k so that the
    projected classical field stays real.
    """

    lattice: LatticeSpec
    masses: tuple[float, ...]
    modes: tuple[tuple[int, int], ...]
    n_max: int
    dispersion: str = "lattice"

    def __post_init__(self):
        masses = tuple(float(m) for m in np.atleast_1d(self.masses))
        object.__setattr__(self, "masses", masses)
        L = self.lattice.sites
        modes = tuple((int(j), signed_wavenumber(int(k), L)) for j, k in self.modes)
        object.__setattr__(self, "modes", modes)
        if self.dispersion not in DISPERSIONS:
            raise ValueError(f"dispersion must be one of {DISPERSIONS}")
        if not modes:
            raise ValueError("select at least one mode")
        if len(set(modes)) != len(modes):
            raise ValueError("mode selection is not injective")
        for j, k in modes:
            if not 0 <= j < len(masses):
                raise ValueError(f"component {j} out of range")
            if (j, signed_wavenumber(-k, L)) not in modes:
                raise ValueError(f"selection not closed under k -> -k: missing {(j, -k)}")
        if np.any(self.frequencies_full() <= 0):
            raise ValueError("zero frequency mode (massless k=0); amplitudes are undefined")

    @classmethod
    def lowest(cls, lattice: LatticeSpec, masses, n_max: int, count: int | None = None,
               dispersion: str = "lattice") -> "ModeBasis":
        """Select the ``count`` lowest-|k| modes as a +/- closed set.

        With ``count=None`` every mode is used, which is only allowed when
        N * L <= 3.
        """
        masses = tuple(np.atleast_1d(masses).astype(float))
        total = len(masses) * lattice.sites
        if count is None:
            if total > 3:
                raise ValueError(f"{total} lattice modes; pass count to select a subset")
            count = total
        chosen: list[tuple[int, int]] = []
        for group in _closed_groups(len(masses), lattice.sites):
            if len(chosen) >= count:
                break
            chosen.extend(group)
        if len(chosen) != count:
            raise ValueError(f"cannot select exactly {count} modes closed under k -> -k")
        return cls(lattice, masses, tuple(chosen), n_max, dispersion)

    @property
    def fock(self) -> FockSpec:
        return FockSpec(len(self.modes), self.n_max)

    @property
    def components(self) -> int:
        return len(self.masses)

    def momenta(self) -> np.ndarray:
        """Signed momenta in FFT order (length L)."""
        L = self.lattice.sites
        ks = np.array([signed_wavenumber(k, L) for k in range(L)])
        return 2 * np.pi * ks / self.lattice.length

    def frequencies_full(self) -> np.ndarray:
        """w[j, k] for every component and FFT-ordered momentum."""
        p = self.momenta()
        if self.dispersion == "continuum":
            return np.sqrt(np.array(self.masses)[:, None] ** 2 + p[None, :] ** 2)
        return np.stack([lattice_frequency(m, p, self.lattice.spacing) for m in self.masses])

    @property
    def frequencies(self) -> np.ndarray:
        """w for each selected Fock mode."""
        w = self.frequencies_full()
        L = self.lattice.sites
        return np.array([w[j, k % L] for j, k in self.modes])

    def mode_index(self) -> tuple[np.ndarray, np.ndarray]:
        L = self.lattice.sites
        js = np.array([j for j, _ in self.modes])
        ks = np.array([k % L for _, k in self.modes])
        return js, ks

    def select(self, full: np.ndarray) -> np.ndarray:
        """Pick selected-mode entries out of an (N, L) array."""
        js, ks = self.mode_index()
        return full[js, ks]

    def field_coefficients(self, component: int) -> np.ndarray:
        """u[i, y] with phi_j(y) = sum_i u[i, y] a_i + h.c. over selected modes.

        Rows for modes of other components are zero.
        """
        L, a = self.lattice.sites, self.lattice.spacing
        y = self.lattice.positions
        p = self.momenta()
        w = self.frequencies
        out = np.zeros((len(self.modes), L), dtype=complex)
        for i, (j, k) in enumerate(self.modes):
            if j == component:
                out[i] = np.exp(1j * p[k % L] * y) / np.sqrt(2 * w[i] * L * a)
        return out

    def project(self, state: FieldState) -> FieldState:
        """Zero every unselected mode of the state."""
        amps = field_to_amplitudes(state, self)
        mask = np.zeros(amps.theta.shape, dtype=bool)
        js, ks = self.mode_index()
        mask[js, ks] = True
        return amplitudes_to_field(ModeAmplitudes(np.where(mask, amps.theta, 0),
                                                  np.where(mask, amps.tau, 0)), self)

    def outside_weight(self, state: FieldState) -> float:
        """Fraction of sum |alpha|^2 carried by unselected modes."""
        amps = field_to_amplitudes(state, self)
        total = np.sum(np.abs(amps.alpha) ** 2)
        if total == 0:
            return 0.0
        inside = np.sum(np.abs(self.select(amps.alpha)) ** 2)
        return float(max(total - inside, 0.0) / total)


@dataclass(frozen=True, eq=False)
class ModeAmplitudes:
    """theta and tau as (N, L) complex arrays in FFT momentum order."""

    theta: np.ndarray
    tau: np.ndarray

    @property
    def alpha(self) -> np.ndarray:
        return COHERENT_SCALE * (self.theta + 1j * self.tau)


def _check_lattice(state: FieldState, basis: ModeBasis):
    if state.sites != basis.lattice.sites or state.components != basis.components:
        raise ValueError(f"state shape {(state.components, state.sites)} does not match basis "
                         f"{(basis.components, basis.lattice.sites)}")
    if np.any(state.twist != 0):
        raise ValueError("twisted (kink) states have no periodic mode expansion")


def field_to_amplitudes(state: FieldState, basis: ModeBasis) -> ModeAmplitudes:
    _check_lattice(state, basis)
    L, a = basis.lattice.sites, basis.lattice.spacing
    norm = a / np.sqrt(L * a)
    w = basis.frequencies_full()
    phi_t = norm * np.fft.fft(state.phi, axis=1)
    pi_t = norm * np.fft.fft(state.pi, axis=1)
    return ModeAmplitudes(np.sqrt(w) * phi_t, pi_t / np.sqrt(w))


def _reality_defect(x: np.ndarray) -> float:
    mirrored = np.roll(x[:, ::-1], 1, axis=1)  # x[-k]
    return float(np.abs(mirrored - x.conj()).max(initial=0.0))


def amplitudes_to_field(amps: ModeAmplitudes, basis: ModeBasis, tol: float = 1e-8) -> FieldState:
    L, a = basis.lattice.sites, basis.lattice.spacing
    w = basis.frequencies_full()
    theta = np.asarray(amps.theta, dtype=complex)
    tau = np.asarray(amps.tau, dtype=complex)
    if theta.shape != (basis.components, L) or tau.shape != theta.shape:
        raise ValueError(f"amplitude arrays must have shape {(basis.components, L)}")
    scale = max(1.0, np.abs(theta).max(initial=0.0), np.abs(tau).max(initial=0.0))
    for name, arr in (("theta", theta), ("tau", tau)):
        if _reality_defect(arr) > tol * scale:
            raise ValueError(f"{name} violates the reality condition x(-p) = x(p)*")
    back = L / np.sqrt(L * a)
    phi = back * np.fft.ifft(theta / np.sqrt(w), axis=1)
    pi = back * np.fft.ifft(tau * np.sqrt(w), axis=1)
    # conjugate-symmetric input gives a real field; drop the rounding residue
    return FieldState(phi.real, pi.real)


def amplitudes_from_alpha(alpha: Sequence[complex], basis: ModeBasis) -> ModeAmplitudes:
    """Full theta/tau arrays for given selected-mode alphas (others zero)."""
    alpha = np.asarray(alpha, dtype=complex)
    if alpha.shape != (len(basis.modes),):
        raise ValueError(f"need {len(basis.modes)} amplitudes, got {alpha.shape}")
    L = basis.lattice.sites
    full = np.zeros((basis.components, L), dtype=complex)
    js, ks = basis.mode_index()
    full[js, ks] = alpha
    mirrored = np.roll(full[:, ::-1], 1, axis=1).conj()  # alpha(-p)*
    theta = (full + mirrored) / np.sqrt(2)
    tau = (full - mirrored) / (1j * np.sqrt(2))
    return ModeAmplitudes(theta, tau)


def state_from_alpha(alpha: Sequence[complex], basis: ModeBasis) -> FieldState:
    return amplitudes_to_field(amplitudes_from_alpha(alpha, basis), basis)


def alpha_of(state: FieldState, basis: ModeBasis) -> np.ndarray:
    """Selected-mode coherent amplitudes of a state."""
    return basis.select(field_to_amplitudes(state, basis).alpha)
