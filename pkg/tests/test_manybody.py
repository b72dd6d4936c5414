import numpy as np
import pytest

from fock_oracle import fock_hamiltonian
from realspace import two_body_matrix
from torusvrep.fourier import TorusFunction, norm, random_function
from torusvrep.manybody import (
    CutoffWarning,
    Interaction,
    ManyBodyState,
    ModelSpec,
    assemble,
    build_basis,
    density_from_state,
    kinetic_energy,
    sample_states,
)
from torusvrep.spaces import cosine_potential, make_potential


@pytest.mark.parametrize("N,K,spin,size", [(1, 1, False, 3), (2, 1, False, 3), (2, 2, True, 45)])
def test_basis_counts(N, K, spin, size):
    assert build_basis(ModelSpec(N, K, spin)).size == size


def test_too_many_particles():
    with pytest.raises(ValueError):
        ModelSpec(4, 1, False)


def test_colex_rank_is_index():
    b = build_basis(ModelSpec(3, 2, True))
    assert np.array_equal(b.rank(b.dets), np.arange(b.size))
    assert all(list(d) == sorted(d) for d in b.dets)


def test_free_single_particle_spectrum():
    H = assemble(ModelSpec(1, 1)).full()
    assert np.allclose(H, np.diag(np.diag(H)))
    assert np.allclose(np.sort(np.linalg.eigvalsh(H)), [0, 2 * np.pi ** 2, 2 * np.pi ** 2])


def test_cosine_couples_neighbours():
    H = assemble(ModelSpec(1, 1), cosine_potential(1.0, 2)).full()
    off = H - np.diag(np.diag(H))
    assert np.allclose(off, 0.5 * (np.eye(3, k=1) + np.eye(3, k=-1)))


def test_kinetic_diagonal_entries(rng):
    # a gauge-fixed potential has no diagonal part, so the diagonal is purely kinetic
    spec = ModelSpec(3, 2, True)
    b = build_basis(spec)
    H = assemble(spec, make_potential(function=random_function(rng, 4))).full()
    expected = 2 * np.pi ** 2 * (b.orbital_k[b.dets] ** 2).sum(axis=1)
    assert np.allclose(np.diag(H).real, expected)


def test_contact_interaction_invisible_to_spinless_pairs(rng):
    spec = ModelSpec(2, 3, False, Interaction.delta(2.5))
    b = build_basis(spec)
    H = assemble(spec).full()
    assert np.allclose(H, np.diag(b.kinetic))
    for det in b.dets[:10]:
        psi = ManyBodyState.determinant(b, det)
        assert assemble(spec).expectation(psi) == pytest.approx(kinetic_energy(psi))


@pytest.mark.parametrize("N,K,spin", [(2, 1, True), (3, 1, True), (3, 2, False), (4, 1, True)])
def test_matches_second_quantized_oracle(rng, N, K, spin):
    w = random_function(rng, 2 * K)
    v = make_potential(function=random_function(rng, 2 * K))
    spec = ModelSpec(N, K, spin, Interaction.multiplicative(w))
    H = assemble(spec, v, use_blocks=False).full()
    ref = fock_hamiltonian(build_basis(spec), v.function.padded(2 * K).coeffs,
                           spec.interaction.coefficients(2 * K))
    assert np.max(np.abs(H - ref)) < 1e-12 * np.max(np.abs(H))


@pytest.mark.parametrize("K,spin", [(1, True), (2, True), (3, False)])
def test_matches_realspace_grid(rng, K, spin):
    v = make_potential(function=random_function(rng, 2 * K))
    w = random_function(rng, 2 * K)
    gamma = 1.7
    inter = Interaction.multiplicative(w + TorusFunction(np.full(4 * K + 1, gamma)))
    spec = ModelSpec(2, K, spin, inter)
    H = assemble(spec, v, use_blocks=False).full()
    ref = two_body_matrix(build_basis(spec), 64, v=v.function, w=w, delta=gamma)
    assert np.max(np.abs(H - ref)) <= 1e-3 * np.max(np.abs(H))


def test_gradient_interaction_matches_realspace():
    # g = 1/2 - x (a sawtooth): its derivative is the contact interaction minus one
    K = 2
    q = np.arange(-2 * K, 2 * K + 1)
    c = np.where(q != 0, -1j / (2 * np.pi * np.where(q == 0, 1, q)), 0)
    g = TorusFunction(c)
    spec = ModelSpec(2, K, True, Interaction.gradient(g))
    H = assemble(spec, use_blocks=False).full()
    ref = two_body_matrix(build_basis(spec), 64, g=lambda x: np.where(x == 0, 0.0, 0.5 - x))
    assert np.max(np.abs(H - ref)) <= 1e-3 * np.max(np.abs(H))
    Hd = assemble(ModelSpec(2, K, True, Interaction.delta(1.0)), use_blocks=False).full()
    assert np.allclose(H, Hd - np.eye(len(H)), atol=1e-12)


def test_gauge_covariance(rng):
    spec = ModelSpec(2, 2, True, Interaction.delta(1.0))
    f = random_function(rng, 4)
    c = 0.37
    # an unfixed potential is a constant plus its class; the constant adds N c
    I = np.eye(build_basis(spec).size)
    H1 = assemble(spec, make_potential(function=f), use_blocks=False).full() + spec.n_particles * f.mean * I
    H2 = assemble(spec, make_potential(function=f + c), use_blocks=False).full() \
        + spec.n_particles * (f.mean + c) * I
    assert np.allclose(H2 - H1, spec.n_particles * c * np.eye(len(H1)), atol=1e-12)


def test_momentum_blocks_decouple(rng):
    spec = ModelSpec(3, 2, True, Interaction.multiplicative(random_function(rng, 4)))
    b = build_basis(spec)
    H = assemble(spec, use_blocks=False).full()
    P = b.momentum
    S = b.twice_sz
    cross = (P[:, None] != P[None, :]) | (S[:, None] != S[None, :])
    assert np.all(H[cross] == 0)
    assert np.allclose(assemble(spec).full(), H)


def test_cutoff_warning():
    with pytest.warns(CutoffWarning):
        assemble(ModelSpec(1, 4), cosine_potential(1.0, 2))


def test_density_examples():
    b = build_basis(ModelSpec(1, 2))
    rho = density_from_state(ManyBodyState.plane_waves(b, [1]))
    assert np.allclose(rho.samples(), 1.0)
    b2 = build_basis(ModelSpec(2, 2))
    rho = density_from_state(ManyBodyState.plane_waves(b2, [0, 1]))
    assert np.allclose(rho.samples(), 2.0)
    amp = np.zeros(b.size, dtype=complex)
    amp[b.index([b.orbital_index(0)])] = amp[b.index([b.orbital_index(1)])] = 1 / np.sqrt(2)
    rho = density_from_state(ManyBodyState(b, amp))
    x = np.linspace(0, 1, 17)
    assert np.allclose(rho.function(x), 1 + np.cos(2 * np.pi * x), atol=1e-14)


def test_density_direct_expansion(rng):
    # direct oracle: sum_sigma int |Psi|^2 over the second coordinate on a grid
    from realspace import determinant_on_grid
    spec = ModelSpec(2, 2, True)
    b = build_basis(spec)
    psi = sample_states(b, rng, 1)[0]
    M = 32
    wave = sum(a * determinant_on_grid(b, d, M) for a, d in zip(psi.amplitudes, b.dets))
    dens = 2 * np.sum(np.abs(wave) ** 2, axis=(0, 1, 3)) / M
    assert np.allclose(density_from_state(psi).samples(M), dens, atol=1e-12)


def test_density_properties(rng):
    spec = ModelSpec(3, 2, True)
    b = build_basis(spec)
    for psi in sample_states(b, rng, 30):
        rho = density_from_state(psi)
        assert rho.function.mean == pytest.approx(3.0, abs=1e-12)
        assert rho.function.is_real(1e-12)


def test_kinetic_examples():
    b = build_basis(ModelSpec(1, 2))
    assert kinetic_energy(ManyBodyState.plane_waves(b, [0])) == 0
    assert kinetic_energy(ManyBodyState.plane_waves(b, [1])) == pytest.approx(2 * np.pi ** 2)
    b3 = build_basis(ModelSpec(3, 2))
    assert kinetic_energy(ManyBodyState.plane_waves(b3, [-1, 0, 1])) == pytest.approx(4 * np.pi ** 2)


def test_kinetic_matches_matrix(rng):
    spec = ModelSpec(2, 3, True)
    form = assemble(spec)
    for psi in sample_states(build_basis(spec), rng, 20):
        assert kinetic_energy(psi) == pytest.approx(form.expectation(psi), rel=1e-12)


def test_state_normalization_enforced():
    b = build_basis(ModelSpec(1, 1))
    with pytest.raises(ValueError):
        ManyBodyState(b, np.ones(3))


@pytest.mark.parametrize("spec", [ModelSpec(1, 4), ModelSpec(2, 3, True)])
def test_vw_bounded_by_twice_kinetic(rng, spec):
    b = build_basis(spec)
    for psi in sample_states(b, rng, 500):
        assert density_from_state(psi).vw <= 2 * kinetic_energy(psi) + 1e-8
