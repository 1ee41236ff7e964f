"""
Not every quantum state is a coherent mixture
=============================================

Coherent-state expectations of a normal-ordered Hamiltonian are classical
energies, and those are nonnegative for the quartic oscillator. Its true
quantum ground energy is negative. The difference is the reachability gap.
"""
import numpy as np

from qfieldlab.fock import FockSpec, quartic_oscillator
from qfieldlab.pqmaps import coherent_energy, reachability_gap

fock = FockSpec(1, 40)
hn = quartic_oscillator(fock, coupling=0.1)

for alpha in (0.0, 0.3, 0.3j, 1.0):
    print(f"<alpha|H_n|alpha> at alpha={alpha}: {coherent_energy(hn, fock, [alpha]):.6f}")

rep = reachability_gap(hn, fock, restarts=8, seed=0)
print("quantum ground energy      :", rep.e_quantum)
print("best coherent-state energy :", rep.e_coherent_min, "at alpha", np.round(rep.alpha_min, 6))
print("gap                        :", rep.gap)

# the gap does not care about a constant shift of the Hamiltonian
shifted = reachability_gap(hn.shifted(2.5), fock, restarts=8, seed=0)
print("gap of H + 2.5             :", shifted.gap)
