"""
Truncated Fock space and operator ordering
==========================================

Build ladder operators on a small multimode Fock space, compare the normal-
and anti-normal-ordered free Hamiltonians, then diagonalize the quartic
oscillator a†a + g :q^4: at increasing cutoffs.
"""
import numpy as np

from qfieldlab.classical import FieldModel, LatticeSpec
from qfieldlab.fock import FockSpec, annihilation, ground_state, quartic_oscillator, spectrum
from qfieldlab.hamiltonian import anti_normal_ordered_hamiltonian, normal_ordered_hamiltonian
from qfieldlab.modes import ModeBasis

# two modes, up to 5 quanta each; mode 0 is the fastest index
spec = FockSpec(modes=2, n_max=5)
print("dimension:", spec.dim, " |1,2> sits at index", spec.index((1, 2)))

a = annihilation(spec, 0).dense()
comm = a @ a.conj().T - a.conj().T @ a
print("[a, a†] diagonal (last level is the truncation artifact):", np.round(comm.diagonal().real[:8], 3))

# free field on a 2-site lattice, both momentum modes quantized
lattice = LatticeSpec(sites=2, spacing=1.0)
model = FieldModel(masses=(1.0,), lattice=lattice)
basis = ModeBasis.lowest(lattice, (1.0,), n_max=5, count=2)
hn = normal_ordered_hamiltonian(model, basis)
ha = anti_normal_ordered_hamiltonian(model, basis)
print("mode frequencies:", basis.frequencies)
print("normal-ordered levels     :", np.round(spectrum(hn, 4), 6))
print("anti-normal-ordered levels:", np.round(spectrum(ha, 4), 6))
print("shift = sum of frequencies:", basis.frequencies.sum())

# the quartic oscillator: the normal-ordered ground state dips below zero
for n_max in (10, 20, 30, 40):
    e0, vec = ground_state(quartic_oscillator(FockSpec(1, n_max), coupling=0.1))
    print(f"n_max={n_max:2d}  E0={e0:+.10f}  weight on |0>={abs(vec[0]) ** 2:.6f}")
