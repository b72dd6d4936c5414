import numpy as np
import pytest
import sympy as sp_

from torusvrep.fourier import random_function
from torusvrep.manybody import ModelSpec, assemble, build_basis, density_from_state, kinetic_energy
from torusvrep.groundstate import energy
from torusvrep.fourier import pair
from torusvrep.nrep import construct, project_to_basis, tbound_constants
from torusvrep.spaces import DensityError, make_density, make_potential


def positive_density(rng, N, K):
    f = random_function(rng, K, decay=1.5)
    f = f + (0.2 + 0.5 * rng.random() - f.samples(512).min())
    return make_density(N, coefficients=f.coeffs)


def orbital_energy_oracle(rho, grid=4096):
    """(1/2) sum_k (1/N) int (|d sqrt rho|^2 + (2 pi k / N)^2 rho^3) on a fine grid."""
    N = rho.n_particles
    x = np.arange(grid) / grid
    k = rho.function.modes
    e = np.exp(2j * np.pi * np.outer(x, k))
    r = (e @ rho.coeffs).real
    dr = (e @ (2j * np.pi * k * rho.coeffs)).real
    A = np.mean(dr ** 2 / (4 * r))
    return 0.5 * sum((A + (2 * np.pi * j / N) ** 2 * np.mean(r ** 3)) / N for j in range(N))


def test_constant_density_gives_plane_waves():
    N = 3
    c = construct(make_density(N, coefficients=[float(N)]))
    x = c.grid
    for k, phi in enumerate(c.orbitals):
        assert np.allclose(phi, np.exp(2j * np.pi * k * x), atol=1e-12)
    assert c.kinetic == pytest.approx(2 * np.pi ** 2 * (0 + 1 + 4), rel=1e-13)


def test_single_particle_is_phase_free(rng):
    rho = positive_density(rng, 1, 5)
    c = construct(rho)
    assert c.kinetic == pytest.approx(0.5 * rho.vw, rel=1e-14)
    assert tbound_constants(1) == (0.0, 0.5)
    assert c.kinetic == pytest.approx(c.bound, rel=1e-14)


def test_two_particle_cosine_density():
    rho = make_density(2, coefficients=[0.5, 2.0, 0.5])
    c = construct(rho)
    assert c.density_error() < 1e-10
    assert c.kinetic == pytest.approx(orbital_energy_oracle(rho), rel=1e-10)
    assert c.kinetic_quadrature == pytest.approx(c.kinetic, rel=1e-10)


@pytest.mark.parametrize("N", [1, 2, 3, 4, 5, 6])
def test_orthonormal_and_periodic(rng, N):
    c = construct(positive_density(rng, N, 4))
    assert np.max(np.abs(c.gram() - np.eye(N))) < 1e-10
    assert c.periodicity_error() < 1e-10
    assert c.density_error() < 1e-10


def test_constants_match_symbolic_expansion():
    N, A = sp_.symbols("N A", positive=True)
    k = sp_.symbols("k", integer=True)
    for n in range(1, 6):
        S = sp_.summation(k ** 2, (k, 0, n - 1))
        # T <= A/2 + (2 pi^2 S / N^3) * N * (3 N^2 + 6 N A)
        chain = sp_.expand((A / 2 + 2 * sp_.pi ** 2 * S / N ** 3 * N * (3 * N ** 2 + 6 * N * A)).subs(N, n))
        c1, c2 = tbound_constants(n)
        assert float(chain.coeff(A, 0)) == pytest.approx(c1, rel=1e-14)
        assert float(chain.coeff(A, 1)) == pytest.approx(c2, rel=1e-14)


def test_bound_holds_constant_two_particles():
    c = construct(make_density(2, coefficients=[2.0]))
    assert c.vw == pytest.approx(0, abs=1e-14)
    assert c.kinetic <= tbound_constants(2)[0]


def test_bound_random_three_particles(rng):
    for _ in range(100):
        c = construct(positive_density(rng, 3, int(rng.integers(1, 8))))
        assert c.kinetic <= c.bound


def test_rejects_density_touching_zero():
    with pytest.raises(DensityError):
        construct(make_density(1, coefficients=[0.5, 1.0, 0.5]))


def test_projection_reproduces_density_and_energy():
    rho = make_density(2, coefficients=[0.3, 2.0, 0.3])
    c = construct(rho)
    psi, loss = project_to_basis(c, build_basis(ModelSpec(2, 24)))
    assert loss < 1e-12
    assert kinetic_energy(psi) == pytest.approx(c.kinetic, rel=1e-9)
    got = density_from_state(psi).function.padded(1).coeffs
    assert np.allclose(got, rho.coeffs, atol=1e-9)


def test_constructed_state_bounds_dual_value(rng):
    # E(v) - <v, rho> <= <H0> of any state with density rho, here the determinant
    rho = positive_density(rng, 2, 3)
    c = construct(rho)
    spec = ModelSpec(2, 8)
    for _ in range(20):
        v = make_potential(function=random_function(rng, 16) * 10)
        assert energy(spec, v) - pair(v, rho) <= c.kinetic + 1e-9
