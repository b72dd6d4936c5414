import warnings

import numpy as np
import pytest

from torusvrep.fourier import norm, pair, random_function
from torusvrep.groundstate import GroundStateResult, energy, solve
from torusvrep.inversion import (
    InversionOptions,
    analytic_invert,
    certificate,
    ensemble_match,
    lieb_maximize,
    penalty_search,
    project_simplex,
    simplex_least_squares,
)
from torusvrep.manybody import Interaction, ModelSpec
from torusvrep.spaces import (
    DensityError,
    delta_potential,
    density_from_function,
    englisch_density,
    make_density,
    make_potential,
    zero_potential,
)
from torusvrep.fourier import TorusFunction

COS = [0.25, 1.0, 0.25]


def test_analytic_invert_constant():
    v = analytic_invert(make_density(1, coefficients=[1.0]))
    assert np.max(np.abs(v.coeffs)) < 1e-14


def test_analytic_invert_closed_loop():
    rho = make_density(1, coefficients=COS)
    v = analytic_invert(rho, 64)
    res = solve(ModelSpec(1, 32), v)
    assert norm(res.density.function - rho.function, "L2") < 1e-6


def test_analytic_invert_preconditions():
    with pytest.raises(DensityError):
        analytic_invert(make_density(2, coefficients=[0.5, 2, 0.5]))
    with pytest.raises(DensityError):
        analytic_invert(make_density(1, coefficients=[0.5, 1, 0.5]))


def test_analytic_invert_englisch_is_distributional():
    h, l2 = [], []
    for K in (16, 32, 64):
        v = analytic_invert(englisch_density(1, 0.5, 0.25, 1, K), K)
        h.append(norm(v, "Hminus1"))
        l2.append(norm(v, "L2"))
    assert l2[0] < l2[1] < l2[2]
    assert max(h) / min(h) < 1.1


# --------------------------------------------------------------------------- simplex

def test_project_simplex():
    y = np.array([0.3, 2.0, -1.0])
    x = project_simplex(y)
    assert x.sum() == pytest.approx(1.0) and np.all(x >= 0)
    assert np.allclose(x, [0, 1, 0])


def _fake_result(densities):
    return GroundStateResult(0.0, np.zeros(len(densities)), tuple(), tuple(densities), 1.0, {})


def test_ensemble_match_singleton():
    a = make_density(1, coefficients=COS)
    t = make_density(1, coefficients=[0.1, 1.0, 0.1])
    m = ensemble_match(t, _fake_result([a]))
    assert np.array_equal(m.weights, [1.0])
    assert m.residual == pytest.approx(norm(a.function - t.function, "L2"))


def test_ensemble_match_midpoint():
    a = make_density(1, coefficients=[0.2, 1.0, 0.2])
    b = make_density(1, coefficients=[0.0, 0.1, 1.0, 0.1, 0.0])
    mid = density_from_function(TorusFunction(0.5 * (a.function.padded(2).coeffs + b.coeffs)), 1)
    m = ensemble_match(mid, _fake_result([a, b]))
    assert np.allclose(m.weights, [0.5, 0.5], atol=1e-12)
    assert m.residual < 1e-12


def test_ensemble_match_hull(rng):
    for _ in range(20):
        dens = [make_density(2, coefficients=(random_function(rng, 3) * 0.2 + 2.0).coeffs) for _ in range(3)]
        lam = rng.dirichlet(np.ones(3))
        t = density_from_function(TorusFunction(sum(l * d.coeffs for l, d in zip(lam, dens))), 2)
        m = ensemble_match(t, _fake_result(dens))
        assert m.residual < 1e-10
        assert m.weights.min() >= 0 and m.weights.sum() == pytest.approx(1.0)


def test_simplex_least_squares_outside_hull():
    G = np.array([[1.0, 0.0], [0.0, 1.0]])
    lam = simplex_least_squares(G, np.array([2.0, -1.0]))
    assert np.allclose(lam, [1.0, 0.0])


# --------------------------------------------------------------------------- Lieb maximization

def test_constant_density_needs_no_potential():
    for spec in (ModelSpec(2, 4), ModelSpec(2, 3, True, Interaction.delta(2.0)), ModelSpec(1, 4)):
        rho = make_density(spec.n_particles, coefficients=[float(spec.n_particles)])
        res = lieb_maximize(rho, spec)
        assert res.iterations == 0 and res.mismatch < 1e-14
        assert np.max(np.abs(res.potential.coeffs)) < 1e-14


def test_single_particle_agrees_with_closed_form():
    rho = make_density(1, coefficients=COS)
    spec = ModelSpec(1, 32)
    res = lieb_maximize(rho, spec, initial=zero_potential(64))
    v = analytic_invert(rho, 64)
    assert res.converged and res.mismatch < 1e-5
    assert norm(res.potential - v, "Hminus1") < 1e-4
    assert abs(res.primal - res.dual) < 1e-6
    assert res.primal == pytest.approx(0.5 * rho.vw, rel=1e-12)


def test_two_fermion_forward_target(rng):
    spec = ModelSpec(2, 4)
    v0 = make_potential(function=random_function(rng, 3) * 3, cutoff=8)
    target = solve(spec, v0)
    assert target.degeneracy == 1 and target.density.eta > 0
    res = lieb_maximize(target.density, spec)
    assert res.converged and res.mismatch < 1e-5
    assert res.gap >= -1e-8


def test_ascent_is_monotone():
    rho = englisch_density(1, 0.5, 0.25, 1, 16)
    res = lieb_maximize(rho, ModelSpec(1, 16), InversionOptions(potential_cutoff=16),
                        initial=zero_potential(16))
    G = [t["G"] for t in res.trace]
    assert all(b >= a - 1e-12 for a, b in zip(G, G[1:]))


def test_gauge_invariance_of_initial_guess(rng):
    rho = make_density(2, coefficients=[0.3, 2.0, 0.3])
    spec = ModelSpec(2, 3)
    f = random_function(rng, 6)
    a = lieb_maximize(rho, spec, initial=make_potential(function=f))
    b = lieb_maximize(rho, spec, initial=make_potential(function=f + 3.5))
    assert np.array_equal(a.potential.coeffs, b.potential.coeffs)


def test_supergradient_directional_derivative(rng):
    spec = ModelSpec(2, 3)
    rho = make_density(2, coefficients=[0.3, 2.0, 0.3])
    for _ in range(5):
        v = make_potential(function=random_function(rng, 6) * 4)
        d = make_potential(function=random_function(rng, 6))
        gs = solve(spec, v)
        assert gs.degeneracy == 1

        def G(t):
            w = v + d * t
            return energy(spec, w) - pair(w, rho)

        t = 1e-5
        fd = (G(t) - G(-t)) / (2 * t)
        assert fd == pytest.approx(pair(d, gs.density) - pair(d, rho), abs=1e-5)


def test_small_density_warns():
    rho = make_density(1, coefficients=[0.4999, 1.0, 0.4999])
    with pytest.warns(Warning):
        lieb_maximize(rho, ModelSpec(1, 4), InversionOptions(max_iter=3))


def test_density_particle_number_must_match():
    with pytest.raises(DensityError):
        lieb_maximize(make_density(2, coefficients=[2.0]), ModelSpec(1, 3))


# --------------------------------------------------------------------------- penalty search

def test_penalty_constant_density_equals_free_energy():
    rho = make_density(2, coefficients=[2.0])
    res = penalty_search(rho, ModelSpec(2, 4), 100.0)
    assert res.value == pytest.approx(energy(ModelSpec(2, 4)), rel=1e-10)
    assert res.value == pytest.approx(2 * np.pi ** 2, rel=1e-10)


def test_penalty_zero_weight_is_ground_energy():
    rho = make_density(1, coefficients=COS)
    res = penalty_search(rho, ModelSpec(1, 6), 0.0)
    assert res.value == pytest.approx(0.0, abs=1e-12)


def test_penalty_approaches_von_weizsacker():
    rho = make_density(1, coefficients=COS)
    vals = [penalty_search(rho, ModelSpec(1, 8), mu).value for mu in (10.0, 1e3, 1e5)]
    assert vals[0] < vals[1] < vals[2]
    # the penalized value approaches A/2 from below at rate 1/mu
    assert vals[2] < 0.5 * rho.vw
    assert vals[2] == pytest.approx(0.5 * rho.vw, rel=1e-3)


def test_penalty_monotone_in_basis_size():
    rho = make_density(2, coefficients=[0.3, 2.0, 0.3])
    spec = ModelSpec(2, 2, False, Interaction.delta(1.0))
    objs = [penalty_search(rho, spec.with_cutoff(K), 1e3).objective for K in (2, 3, 5)]
    assert objs[1] <= objs[0] + 1e-9 and objs[2] <= objs[1] + 1e-9


# --------------------------------------------------------------------------- certificates

def test_certificate_trivial():
    c = certificate(make_density(1, coefficients=[1.0]), zero_potential(4), ModelSpec(1, 2))
    assert c.dual == 0 and c.primal == pytest.approx(0, abs=1e-15) and c.accepted


def test_certificate_closed_loop():
    rho = make_density(1, coefficients=COS)
    c = certificate(rho, analytic_invert(rho, 64), ModelSpec(1, 32))
    assert abs(c.gap) < 1e-6 and c.accepted


def test_certificate_rejects_wrong_potential():
    rho = make_density(1, coefficients=COS)
    c = certificate(rho, delta_potential(1.0, 64), ModelSpec(1, 32))
    assert c.gap > 1e-3 and not c.accepted and c.weak_duality
