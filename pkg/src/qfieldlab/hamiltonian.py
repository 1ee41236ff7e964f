"""Normal- and anti-normal-ordered Fock Hamiltonians of a lattice field model.

The field at site y is expanded over the selected modes,

    phi_j(y) = sum_i u_i(y) a_i + h.c.,   u_i(y) = exp(i p_i y) / sqrt(2 w_i L a),

and each term of the classical energy is quantized with a fixed ordering.
Only the selected modes are quantized; a classical state lying in the
selected subspace has energy exactly equal to the coherent expectation of
the normal-ordered operator.
"""
from __future__ import annotations

import warnings

import numpy as np
import scipy.sparse as sp

from .classical import FieldModel
from .fock import FieldOperator, FockSpec, OperatorMatrix, annihilation
from .modes import ModeBasis

ORDERINGS = ("normal", "anti-normal")


def _check(model: FieldModel, basis: ModeBasis):
    if model.lattice != basis.lattice:
        raise ValueError("model and basis live on different lattices")
    if tuple(model.masses) != tuple(basis.masses):
        raise ValueError("model and basis masses differ")
    degree = {"free": 2, "phi4": 4, "sine-gordon": 2}[model.potential]
    if basis.n_max < degree:
        warnings.warn(f"n_max={basis.n_max} cannot represent degree-{degree} terms fully",
                      RuntimeWarning, stacklevel=3)


def _field_ops(basis: ModeBasis, fock: FockSpec) -> dict[int, list[FieldOperator]]:
    """FieldOperator for every (component, site) that has selected modes."""
    ops = {}
    for j in range(basis.components):
        u = basis.field_coefficients(j)
        if np.any(u):
            ops[j] = [FieldOperator(fock, u[:, y]) for y in range(basis.lattice.sites)]
    return ops


def _power(op: FieldOperator, n: int, ordering: str):
    return op.normal_power(n) if ordering == "normal" else op.anti_normal_power(n)


def _cos(op: FieldOperator, k: float, ordering: str):
    e = op.normal_exp(k) if ordering == "normal" else op.anti_normal_exp(k)
    return 0.5 * (e + e.conj().T)


def field_hamiltonian(model: FieldModel, basis: ModeBasis, ordering: str = "normal") -> OperatorMatrix:
    if ordering not in ORDERINGS:
        raise ValueError(f"ordering must be one of {ORDERINGS}")
    _check(model, basis)
    fock = basis.fock
    dim = fock.dim
    H = sp.csr_matrix((dim, dim), dtype=complex)
    shift = 0.0
    for i, w in enumerate(basis.frequencies):
        a = annihilation(fock, i).entries
        H = H + w * (a.conj().T @ a)
        if ordering == "anti-normal":
            shift += w
    if model.potential != "free":
        spacing = model.lattice.spacing
        fields = _field_ops(basis, fock)
        if model.potential == "phi4":
            lam = model.coupling
            comps = sorted(fields)
            for y in range(model.lattice.sites):
                for j in comps:
                    H = H + spacing * lam / 4 * _power(fields[j][y], 4, ordering)
                for a_, j1 in enumerate(comps):
                    for j2 in comps[a_ + 1:]:
                        cross = _power(fields[j1][y], 2, ordering) @ _power(fields[j2][y], 2, ordering)
                        H = H + spacing * lam / 2 * cross
        else:
            lam = model.coupling
            cos_sum = np.zeros((dim, dim), dtype=complex)
            for j, per_site in fields.items():
                m = model.masses[j]
                k = np.sqrt(lam) / m
                for y, op in enumerate(per_site):
                    cos_sum -= (spacing * m**4 / lam) * _cos(op, k, ordering)
                    H = H - (spacing * 0.5 * m**2) * _power(op, 2, ordering)
                    shift += spacing * m**4 / lam
            # :cos: is dense in the Fock basis
            H = H + sp.csr_matrix(cos_sum)
    H = H + shift * sp.identity(dim, dtype=complex, format="csr")
    # exact Hermitian part; assembly leaves rounding-level antihermitian residue
    H = 0.5 * (H + H.conj().T)
    return OperatorMatrix(H.tocsr(), hermitian=True)


def normal_ordered_hamiltonian(model: FieldModel, basis: ModeBasis) -> OperatorMatrix:
    """H_n: every creation operator left of every annihilation operator."""
    return field_hamiltonian(model, basis, "normal")


def anti_normal_ordered_hamiltonian(model: FieldModel, basis: ModeBasis) -> OperatorMatrix:
    """Every annihilation operator left of every creation operator."""
    return field_hamiltonian(model, basis, "anti-normal")
