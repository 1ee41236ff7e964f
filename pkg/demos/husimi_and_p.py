"""
Q and P maps
============

Q: the overlap of a density matrix with the coherent state of a classical
configuration. For a coherent density matrix it is a unit-width Gaussian in
the scaled mode coordinates. P: averaging coherent projectors over a
classical ensemble; a Gaussian ensemble around the vacuum gives a thermal
state.
"""
import numpy as np

from qfieldlab.classical import FieldState, LatticeSpec
from qfieldlab.fock import DensityMatrix
from qfieldlab.modes import ModeBasis, state_from_alpha
from qfieldlab.pqmaps import (GaussianEnsemble, coherent_vector, gaussian_q_prediction, husimi_grid,
                              p_reconstruct, q_gaussian_check, q_probability, thermal_density,
                              trace_distance)

basis = ModeBasis.lowest(LatticeSpec(8, 1.0), (1.0,), n_max=20, count=3)
base = state_from_alpha([0.5, 0.2j, -0.3], basis)
rho = DensityMatrix.pure(coherent_vector(base, basis).vector)

probe = state_from_alpha([0.9, 0.1j, -0.1], basis)
print("Q(probe)           :", q_probability(rho, probe, basis))
print("Gaussian prediction:", gaussian_q_prediction(probe, base, basis))
rep = q_gaussian_check(base, basis, probes=100, seed=1)
print("max relative deviation over 100 probes:", rep.max_rel_dev)

# single-mode Husimi function of a thermal state, integrated over the plane
n_max = 20
h = 0.05
x = np.arange(-6, 6 + h / 2, h)
grid = x[None, :] + 1j * x[:, None]
q = husimi_grid(DensityMatrix(thermal_density(0.5, n_max)), grid)
print("integral of Q/pi:", q.sum() * h * h / np.pi)
print("Q at origin (1/(1+nbar) = 0.667):", husimi_grid(DensityMatrix(thermal_density(0.5, n_max)), 0.0))

# P reconstruction of the same thermal state from a Gaussian ensemble
single = ModeBasis.lowest(LatticeSpec(2, 1.0), (1.0,), n_max=n_max, count=1)
vacuum = FieldState(np.zeros((1, 2)), np.zeros((1, 2)))
for samples in (10**3, 10**4, 10**5):
    recon, err = p_reconstruct(GaussianEnsemble(vacuum, np.sqrt(0.5), seed=3), single, samples=samples)
    td = trace_distance(recon, thermal_density(0.5, n_max))
    print(f"samples={samples:>6d}  trace distance {td:.4f}  (standard error {err:.4f})")
print("reconstructed occupation probabilities:", np.round(recon.matrix().diagonal().real[:5], 4))
print("thermal                              :", np.round(thermal_density(0.5, n_max).diagonal().real[:5], 4))
