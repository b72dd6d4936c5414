"""Ground energy of a particle on a ring with a delta comb.

Plane-wave Galerkin energies of a delta potential converge like 1/K.  A
polynomial fit in 1/K over several cutoffs recovers the band-bottom root of
q tan(q/2) = gamma to about ten digits.
"""
import numpy as np
from scipy.optimize import brentq

from torusvrep.groundstate import energy, extrapolate_energy
from torusvrep.manybody import ModelSpec
from torusvrep.spaces import delta_potential

gamma = 5.0
q = brentq(lambda q: q * np.tan(q / 2) - gamma, 1e-12, np.pi - 1e-12)
exact = q * q / 2 - gamma  # gauge: the comb has its mean removed

print(f"transcendental root  E0 = {exact:.12f}")
for K in (8, 32, 128, 256):
    e = energy(ModelSpec(1, K), delta_potential(gamma, 2 * K))
    print(f"K = {K:4d}            E0 = {e:.12f}   error {e - exact:+.2e}")

study = extrapolate_energy(ModelSpec(1, 32), lambda K: delta_potential(gamma, 2 * K))
print(f"extrapolated         E0 = {study.extrapolated:.12f}   error {study.extrapolated - exact:+.2e}")
