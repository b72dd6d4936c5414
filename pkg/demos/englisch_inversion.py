"""Invert a density with a cusp and watch the potential become distributional.

rho(x) = (a + b d(x)^(alpha + 1/2))^2 has a kink at x = 0.  Its exact
potential is not a function, so as the cutoff grows the L2 norm of the
recovered potential keeps growing while the H^-1 norm settles.
"""
import warnings

from torusvrep.fourier import norm
from torusvrep.inversion import InversionOptions, lieb_maximize
from torusvrep.manybody import ModelSpec
from torusvrep.spaces import englisch_density, zero_potential

a, b, alpha = 1.0, 0.5, 0.25
print(" K  steps  mismatch   gap        ||v||_H-1  ||v||_L2")
for K in (16, 32, 48):
    rho = englisch_density(a, b, alpha, 1, K)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        res = lieb_maximize(rho, ModelSpec(1, K), InversionOptions(potential_cutoff=K),
                            initial=zero_potential(K))
    print(f"{K:2d}  {res.iterations:5d}  {res.mismatch:.2e}  {res.gap:+.2e}  "
          f"{norm(res.potential, 'Hminus1'):9.4f}  {norm(res.potential, 'L2'):8.3f}")
