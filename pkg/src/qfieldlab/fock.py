"""Truncated multimode bosonic Fock space.

Operators are stored as scipy CSR matrices over the truncated space with
per-mode occupations ``0..n_max``. The flat basis index puts mode 0 fastest:

    index = n_0 + n_1 (n_max+1) + n_2 (n_max+1)^2 + ...

Every normal-ordered monomial ``a†^r a^s`` built from truncated ladder
matrices is the exact compression of the infinite-dimensional operator onto
the truncated space, because ``a^s`` never leaves the space and ``a†^r`` can
only leave it. Anti-normal forms are therefore assembled by reordering into
normal form first (see :func:`anti_normal_monomial`), never by multiplying
truncated ``a`` and ``a†`` in anti-normal order.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import comb, factorial
from typing import Sequence

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

DENSE_EIG_LIMIT = 4096
HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class FockSpec:
    modes: int
    n_max: int

    def __post_init__(self):
        if self.modes < 1:
            raise ValueError(f"need at least one mode, got {self.modes}")
        if self.n_max < 1:
            raise ValueError(f"n_max must be >= 1, got {self.n_max}")

    @property
    def local_dim(self) -> int:
        return self.n_max + 1

    @property
    def dim(self) -> int:
        return self.local_dim**self.modes

    def index(self, occupations: Sequence[int]) -> int:
        occ = np.asarray(occupations, dtype=np.int64)
        if occ.shape != (self.modes,):
            raise ValueError(f"expected {self.modes} occupations, got {occ.shape}")
        if occ.min() < 0 or occ.max() > self.n_max:
            raise ValueError(f"occupations {occ.tolist()} outside 0..{self.n_max}")
        strides = self.local_dim ** np.arange(self.modes, dtype=np.int64)
        return int(occ @ strides)

    def occupations(self, index: int) -> tuple[int, ...]:
        if not 0 <= index < self.dim:
            raise ValueError(f"index {index} outside 0..{self.dim - 1}")
        out = []
        for _ in range(self.modes):
            index, n = divmod(index, self.local_dim)
            out.append(n)
        return tuple(out)

    def occupation_table(self) -> np.ndarray:
        """(dim, modes) integer array of occupations for every flat index."""
        idx = np.arange(self.dim, dtype=np.int64)
        return np.stack([(idx // self.local_dim**k) % self.local_dim
                         for k in range(self.modes)], axis=1)

    def basis_vector(self, occupations: Sequence[int]) -> np.ndarray:
        v = np.zeros(self.dim, dtype=complex)
        v[self.index(occupations)] = 1.0
        return v


@dataclass(frozen=True)
class OperatorMatrix:
    """A (sparse) operator on a truncated Fock space."""

    entries: sp.csr_matrix
    hermitian: bool = False

    def __post_init__(self):
        m = sp.csr_matrix(self.entries, dtype=complex)
        if m.shape[0] != m.shape[1]:
            raise ValueError(f"operator must be square, got {m.shape}")
        object.__setattr__(self, "entries", m)
        if self.hermitian:
            dev = hermitian_defect(m)
            if dev > HERMITIAN_TOL * max(1.0, abs(m).max() if m.nnz else 1.0):
                raise ValueError(f"operator tagged hermitian but max|A - A^H| = {dev:.3e}")

    @property
    def dim(self) -> int:
        return self.entries.shape[0]

    def dense(self) -> np.ndarray:
        return self.entries.toarray()

    @property
    def H(self) -> "OperatorMatrix":
        return OperatorMatrix(self.entries.conj().T.tocsr(), self.hermitian)

    def __matmul__(self, other):
        if isinstance(other, OperatorMatrix):
            return OperatorMatrix(self.entries @ other.entries)
        return self.entries @ other

    def __add__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix(self.entries + other.entries,
                              self.hermitian and other.hermitian)

    def __sub__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix(self.entries - other.entries,
                              self.hermitian and other.hermitian)

    def __mul__(self, scalar) -> "OperatorMatrix":
        herm = self.hermitian and np.isreal(scalar)
        return OperatorMatrix(self.entries * scalar, bool(herm))

    __rmul__ = __mul__

    def shifted(self, constant: float) -> "OperatorMatrix":
        """Return ``self + constant * I``."""
        eye = sp.identity(self.dim, dtype=complex, format="csr")
        return OperatorMatrix(self.entries + constant * eye, self.hermitian)

    def expect_vector(self, vec: np.ndarray) -> complex:
        """<v|A|v> for a normalized state vector."""
        return complex(np.vdot(vec, self.entries @ vec))


def hermitian_defect(m) -> float:
    diff = m - m.conj().T
    if sp.issparse(diff):
        return float(abs(diff).max()) if diff.nnz else 0.0
    return float(np.abs(diff).max()) if diff.size else 0.0


class DensityMatrix:
    """Density matrix, either dense or as a weighted sum of pure projectors.

    The factored form ``rho = sum_k w_k |v_k><v_k|`` keeps finite coherent
    ensembles cheap at Fock dimensions where a dense D x D matrix would not
    fit in memory. ``matrix()`` always materializes the dense form.
    """

    def __init__(self, entries=None, *, vectors=None, weights=None, check=True):
        if (entries is None) == (vectors is None):
            raise ValueError("give exactly one of entries or vectors")
        if entries is not None:
            entries = np.asarray(entries, dtype=complex)
            if entries.ndim != 2 or entries.shape[0] != entries.shape[1]:
                raise ValueError(f"density matrix must be square, got {entries.shape}")
            self._entries = entries
            self.vectors = None
            self.weights = None
            self.dim = entries.shape[0]
        else:
            vecs = np.atleast_2d(np.asarray(vectors, dtype=complex))
            w = np.ones(len(vecs)) if weights is None else np.asarray(weights, dtype=float)
            if w.shape != (len(vecs),):
                raise ValueError("one weight per vector required")
            if np.any(w < 0):
                raise ValueError("weights must be nonnegative")
            norms = np.linalg.norm(vecs, axis=1)
            if np.any(norms == 0):
                raise ValueError("zero vector in pure-state decomposition")
            self.vectors = vecs / norms[:, None]
            self.weights = w / w.sum()
            self._entries = None
            self.dim = vecs.shape[1]
        if check:
            self.validate()

    @classmethod
    def pure(cls, vec) -> "DensityMatrix":
        return cls(vectors=[vec], weights=[1.0])

    @property
    def is_factored(self) -> bool:
        return self._entries is None

    def matrix(self) -> np.ndarray:
        if self._entries is None:
            v = self.vectors
            self._entries = (v.T * self.weights) @ v.conj()
        return self._entries

    def trace(self) -> float:
        if self._entries is None:
            return float(self.weights.sum())
        return float(np.trace(self._entries).real)

    def validate(self, tol_herm=1e-12, tol_trace=1e-10, tol_psd=1e-10) -> None:
        if self._entries is None:
            # weights >= 0 and unit vectors: Hermitian PSD by construction
            if abs(self.trace() - 1.0) > tol_trace:
                raise ValueError(f"trace {self.trace()} != 1")
            return
        m = self._entries
        if hermitian_defect(m) > tol_herm:
            raise ValueError(f"density matrix not Hermitian (defect {hermitian_defect(m):.2e})")
        tr = np.trace(m).real
        if abs(tr - 1.0) > tol_trace:
            raise ValueError(f"trace {tr} != 1")
        emin = np.linalg.eigvalsh(m).min()
        if emin < -tol_psd:
            raise ValueError(f"density matrix has negative eigenvalue {emin:.3e}")

    def overlap(self, vec: np.ndarray) -> float:
        """<v|rho|v>."""
        if self._entries is None:
            amps = self.vectors.conj() @ vec
            return float(self.weights @ np.abs(amps) ** 2)
        return float(np.vdot(vec, self._entries @ vec).real)


def annihilation(spec: FockSpec, mode: int) -> OperatorMatrix:
    if not 0 <= mode < spec.modes:
        raise IndexError(f"mode {mode} out of range for {spec.modes} modes")
    d = spec.local_dim
    a = sp.diags(np.sqrt(np.arange(1, d, dtype=float)), 1, format="csr", dtype=complex)
    left = sp.identity(d ** (spec.modes - 1 - mode), format="csr")
    right = sp.identity(d**mode, format="csr")
    return OperatorMatrix(sp.kron(sp.kron(left, a), right, format="csr"))


def creation(spec: FockSpec, mode: int) -> OperatorMatrix:
    return annihilation(spec, mode).H


def number(spec: FockSpec, mode: int) -> OperatorMatrix:
    occ = spec.occupation_table()[:, mode].astype(complex)
    return OperatorMatrix(sp.diags(occ, format="csr"), hermitian=True)


def identity(spec: FockSpec) -> OperatorMatrix:
    return OperatorMatrix(sp.identity(spec.dim, dtype=complex, format="csr"), hermitian=True)


def quadratures(spec: FockSpec, mode: int) -> tuple[OperatorMatrix, OperatorMatrix]:
    """q = (a + a†)/√2 and p = i(a† − a)/√2 for one mode."""
    a = annihilation(spec, mode).entries
    ad = a.conj().T
    q = OperatorMatrix((a + ad) / np.sqrt(2), hermitian=True)
    p = OperatorMatrix(1j * (ad - a) / np.sqrt(2), hermitian=True)
    return q, p


class FieldOperator:
    """Linear combination ``A = sum_k u_k a_k`` and its adjoint.

    ``(A + A†)`` is a Hermitian field operator. ``c = [A, A†] = sum |u_k|^2``
    is the scalar that enters every reordering.
    """

    def __init__(self, spec: FockSpec, coeffs):
        coeffs = np.asarray(coeffs, dtype=complex)
        if coeffs.shape != (spec.modes,):
            raise ValueError(f"need {spec.modes} coefficients, got {coeffs.shape}")
        self.spec = spec
        self.coeffs = coeffs
        A = sp.csr_matrix((spec.dim, spec.dim), dtype=complex)
        for k, u in enumerate(coeffs):
            if u != 0:
                A = A + u * annihilation(spec, k).entries
        self.A = A.tocsr()
        self.Ad = self.A.conj().T.tocsr()
        self.commutator = float(np.sum(np.abs(coeffs) ** 2))
        self._pow = {0: sp.identity(spec.dim, dtype=complex, format="csr")}
        self._dpow = {0: self._pow[0]}

    def power(self, n: int):
        if n not in self._pow:
            self._pow[n] = (self.power(n - 1) @ self.A).tocsr()
        return self._pow[n]

    def adjoint_power(self, n: int):
        if n not in self._dpow:
            self._dpow[n] = (self.adjoint_power(n - 1) @ self.Ad).tocsr()
        return self._dpow[n]

    def normal_monomial(self, r: int, s: int):
        """A†^r A^s (exact compression)."""
        return (self.adjoint_power(r) @ self.power(s)).tocsr()

    def anti_normal_monomial(self, s: int, r: int):
        """A^s A†^r, reordered to sum_k k! C(s,k) C(r,k) c^k A†^(r-k) A^(s-k)."""
        out = sp.csr_matrix((self.spec.dim, self.spec.dim), dtype=complex)
        for k in range(min(r, s) + 1):
            coef = factorial(k) * comb(s, k) * comb(r, k) * self.commutator**k
            out = out + coef * self.normal_monomial(r - k, s - k)
        return out.tocsr()

    def normal_power(self, n: int):
        """:(A + A†)^n:"""
        out = sp.csr_matrix((self.spec.dim, self.spec.dim), dtype=complex)
        for r in range(n + 1):
            out = out + comb(n, r) * self.normal_monomial(r, n - r)
        return out.tocsr()

    def anti_normal_power(self, n: int):
        """Anti-normal ordered (A + A†)^n: every A to the left of every A†."""
        out = sp.csr_matrix((self.spec.dim, self.spec.dim), dtype=complex)
        for r in range(n + 1):
            out = out + comb(n, r) * self.anti_normal_monomial(n - r, r)
        return out.tocsr()

    def normal_exp(self, k: float):
        """:exp(i k (A + A†)): = exp(i k A†) exp(i k A), as a dense array.

        Distinct modes commute, so this is the Kronecker product of the
        single-mode factors exp(i k u* a†) exp(i k u a); each truncated
        exponential series terminates and is an exact compression.
        """
        d = self.spec.local_dim
        a = np.diag(np.sqrt(np.arange(1, d, dtype=float)), 1).astype(complex)
        out = None
        for u in self.coeffs:  # mode 0 first, ends up fastest
            factor = _nilpotent_exp(1j * k * np.conj(u) * a.T) @ _nilpotent_exp(1j * k * u * a)
            out = factor if out is None else np.kron(factor, out)
        return out

    def anti_normal_exp(self, k: float):
        """exp(i k A) exp(i k A†) = exp(-k^2 c) :exp(i k (A + A†)):. Dense."""
        return np.exp(-k * k * self.commutator) * self.normal_exp(k)


def _nilpotent_exp(x: np.ndarray) -> np.ndarray:
    """exp(x) for strictly triangular x; the series terminates."""
    out = np.eye(len(x), dtype=complex)
    term = np.eye(len(x), dtype=complex)
    for n in range(1, len(x)):
        term = term @ x / n
        out = out + term
    return out


def quartic_oscillator(spec: FockSpec, coupling: float, omega: float = 1.0,
                       mode: int = 0, ordering: str = "normal") -> OperatorMatrix:
    """omega·a†a + coupling·q^4 on one mode, q = (a + a†)/√2.

    ``ordering`` is "normal" (every a† left of every a, zero-point terms
    dropped) or "anti-normal".
    """
    coeffs = np.zeros(spec.modes, dtype=complex)
    coeffs[mode] = 1 / np.sqrt(2)
    field_op = FieldOperator(spec, coeffs)
    a = annihilation(spec, mode).entries
    if ordering == "normal":
        quad = a.conj().T @ a
        quartic = field_op.normal_power(4)
    elif ordering == "anti-normal":
        quad = a.conj().T @ a + sp.identity(spec.dim, format="csr")
        quartic = field_op.anti_normal_power(4)
    else:
        raise ValueError(f"unknown ordering {ordering!r}")
    return OperatorMatrix(omega * quad + coupling * quartic, hermitian=True)


def expectation(rho: DensityMatrix, op: OperatorMatrix) -> complex:
    """Tr(rho · op)."""
    if rho.dim != op.dim:
        raise ValueError(f"dimension mismatch: rho {rho.dim}, op {op.dim}")
    if rho.is_factored:
        vals = [np.vdot(v, op.entries @ v) for v in rho.vectors]
        val = complex(np.dot(rho.weights, vals))
    else:
        # Tr(rho A) = sum_ij rho_ji A_ij
        A = op.entries.tocoo()
        val = complex(np.sum(rho.matrix()[A.col, A.row] * A.data))
    if op.hermitian and abs(val.imag) > 1e-10 * max(1.0, abs(val.real)):
        raise ArithmeticError(f"Hermitian expectation has imaginary part {val.imag:.3e}")
    return val


def ground_state(op: OperatorMatrix) -> tuple[float, np.ndarray]:
    """Smallest eigenvalue and normalized eigenvector of a Hermitian operator."""
    if not op.hermitian and hermitian_defect(op.entries) > HERMITIAN_TOL:
        raise ValueError("ground_state requires a Hermitian operator")
    if op.dim <= DENSE_EIG_LIMIT:
        vals, vecs = scipy.linalg.eigh(op.dense(), subset_by_index=[0, 0])
        energy, vec = float(vals[0]), vecs[:, 0]
    else:
        try:
            vals, vecs = spla.eigsh(op.entries, k=1, which="SA", tol=1e-12)
        except spla.ArpackNoConvergence as exc:
            raise RuntimeError("eigen-solver did not converge") from exc
        energy, vec = float(vals[0]), vecs[:, 0]
    vec = vec / np.linalg.norm(vec)
    # fix the global phase: largest component real positive
    j = np.argmax(np.abs(vec))
    vec = vec * (abs(vec[j]) / vec[j])
    scale = spla.norm(op.entries, ord=1) if op.entries.nnz else 1.0
    resid = np.linalg.norm(op.entries @ vec - energy * vec)
    if resid > 1e-8 * max(scale, 1.0):
        raise RuntimeError(f"ground-state residual {resid:.3e} too large")
    return energy, vec


def spectrum(op: OperatorMatrix, count: int | None = None) -> np.ndarray:
    """Lowest ``count`` eigenvalues (all when None) of a Hermitian operator."""
    vals = scipy.linalg.eigvalsh(op.dense())
    return vals if count is None else vals[:count]
