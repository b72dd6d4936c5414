"""Density-to-potential inversion through the concave dual problem.

For a target density rho, the function G(v) = E(v) - <v, rho> is concave in v
and its maximum is the universal functional F(rho).  A supergradient of G is
rho_v - rho, where rho_v is a ground-state density (or, when the ground level
is degenerate, the ensemble density closest to rho).  A maximizer -v* is a
subgradient of F at rho, i.e. rho is the ground density of v*.
"""
from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import minimize

from .fourier import TorusFunction, differentiate, norm, oversampled_size, sobolev_weights, transform
from .groundstate import GroundStateResult, solve
from .manybody import ModelSpec, assemble, build_basis, one_body_density_coefficients, ManyBodyState
from .nrep import construct
from .spaces import (
    DensityError,
    DensityField,
    PotentialClass,
    density_from_function,
    make_potential,
    zero_potential,
)

log = logging.getLogger(__name__)

WEAK_DUALITY_TOL = 1e-8
SMALL_DENSITY = 1e-3


class InversionWarning(UserWarning):
    pass


def _l2(c: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.abs(c) ** 2)))


def _density_difference(a: DensityField, b: DensityField) -> np.ndarray:
    K = max(a.cutoff, b.cutoff)
    return a.function.padded(K).coeffs - b.function.padded(K).coeffs


# --------------------------------------------------------------------------- N = 1

def analytic_invert(rho: DensityField, cutoff: int | None = None) -> PotentialClass:
    """Single-particle inversion v = (sqrt rho)'' / (2 sqrt rho), gauge-fixed.

    sqrt(rho) is sampled on a fine grid and differentiated spectrally; the
    result is truncated at ``cutoff`` (default 2 * rho.cutoff).
    """
    if rho.n_particles != 1:
        raise DensityError("the closed-form inversion applies to one particle only")
    if not rho.strictly_positive:
        raise DensityError("the closed-form inversion needs a strictly positive density")
    Kv = 2 * max(rho.cutoff, 1) if cutoff is None else int(cutoff)
    M = 2 * oversampled_size(max(Kv, rho.cutoff))
    s = np.sqrt(rho.samples(M))
    root = transform(s, (M - 1) // 2)
    lap = differentiate(root, 2).samples(M).real
    v = transform(lap / (2.0 * s), Kv)
    return make_potential(function=v)


# --------------------------------------------------------------------------- ensembles

@dataclass(frozen=True, eq=False)
class EnsembleMatch:
    weights: np.ndarray
    density: DensityField
    residual: float


def project_simplex(y: np.ndarray) -> np.ndarray:
    """Euclidean projection onto {x >= 0, sum x = 1} (sort-based)."""
    n = y.size
    u = np.sort(y)[::-1]
    css = np.cumsum(u) - 1.0
    ind = np.arange(1, n + 1)
    cond = u - css / ind > 0
    r = ind[cond][-1]
    theta = css[r - 1] / r
    return np.maximum(y - theta, 0.0)


def simplex_least_squares(G: np.ndarray, b: np.ndarray, iters: int = 2000,
                          tol: float = 1e-15) -> np.ndarray:
    """argmin lam^T G lam - 2 b^T lam over the probability simplex.

    Accelerated projected gradient followed by an exact solve of the KKT
    system on the detected support.
    """
    n = b.size
    if n == 1:
        return np.ones(1)
    L = max(float(np.linalg.eigvalsh(G).max()), 1e-300)
    x = np.full(n, 1.0 / n)
    y = x.copy()
    t = 1.0
    for _ in range(iters):
        x_new = project_simplex(y - (G @ y - b) / L)
        t_new = 0.5 * (1 + np.sqrt(1 + 4 * t * t))
        y = x_new + (t - 1) / t_new * (x_new - x)
        if np.max(np.abs(x_new - x)) < tol:
            x = x_new
            break
        x, t = x_new, t_new

    def obj(lam):
        return float(lam @ G @ lam - 2 * b @ lam)

    support = np.nonzero(x > 1e-12)[0]
    if support.size:
        m = support.size
        A = np.zeros((m + 1, m + 1))
        A[:m, :m] = G[np.ix_(support, support)]
        A[:m, m] = A[m, :m] = 1.0
        rhs = np.concatenate([b[support], [1.0]])
        sol = np.linalg.lstsq(A, rhs, rcond=None)[0][:m]
        if np.all(sol >= 0):
            cand = np.zeros(n)
            cand[support] = sol
            cand /= cand.sum()
            if obj(cand) <= obj(x):
                x = cand
    return x


def ensemble_match(target: DensityField, result: GroundStateResult,
                   cutoff: int | None = None) -> EnsembleMatch:
    """Convex weights over the ground-state densities closest to ``target`` in L2.

    With ``cutoff`` the distance only counts modes |k| <= cutoff.
    """
    dens = result.densities
    if not dens:
        raise ValueError("ground-state result carries no densities")
    K = max(max(d.cutoff for d in dens), target.cutoff)
    R = np.array([d.function.padded(K).coeffs for d in dens])
    t = target.function.padded(K).coeffs
    sel = slice(None) if cutoff is None or cutoff >= K else slice(K - cutoff, K + cutoff + 1)
    Rs, ts = R[:, sel], t[sel]
    G = np.real(Rs.conj() @ Rs.T)
    b = np.real(Rs.conj() @ ts)
    lam = simplex_least_squares(G, b)
    c = lam @ R
    matched = density_from_function(TorusFunction(c), target.n_particles, check_sign=False)
    return EnsembleMatch(lam, matched, _l2(c[sel] - ts))


# --------------------------------------------------------------------------- penalty search

@dataclass(frozen=True, eq=False)
class PenaltyResult:
    value: float
    objective: float
    mismatch: float
    state: ManyBodyState
    converged: bool
    message: str = ""


def penalty_search(rho: DensityField, spec: ModelSpec, mu: float, starts: int = 3,
                   seed: int = 0, warm_start: ManyBodyState | None = None,
                   max_iter: int = 2000) -> PenaltyResult:
    """Minimize <H0> + mu ||rho_Psi - rho||^2 over normalized Galerkin states.

    H0 is kinetic plus interaction.  Each start is a local L-BFGS descent on
    the unnormalized amplitude vector with the objective evaluated at its
    normalization; starts are the H0 ground state, the optional warm start,
    and seeded random vectors.  Returns <H0> at the best local minimum.
    """
    if mu < 0:
        raise ValueError("penalty weight must be nonnegative")
    basis = build_basis(spec)
    form = assemble(spec, None)
    Q = 2 * spec.cutoff
    t = rho.function.padded(Q).coeffs
    outside = 0.0
    if rho.cutoff > Q:
        full = rho.coeffs
        outside = float(np.sum(np.abs(full) ** 2) - np.sum(np.abs(t) ** 2))
    tgt, src, p, r, sign = basis.singles()
    transfer = basis.orbital_k[p] - basis.orbital_k[r] + Q  # index of D_{k_p - k_r}
    dens_index = basis.orbital_k[r] - basis.orbital_k[p] + Q
    d = basis.size

    def evaluate(x):
        c = x[:d] + 1j * x[d:]
        nrm = np.linalg.norm(c)
        psi = c / nrm
        Hpsi = form.apply(psi)
        e = float(np.vdot(psi, Hpsi).real)
        vals = np.conj(psi[tgt]) * sign * psi[src]
        rq = np.bincount(dens_index, weights=vals.real, minlength=2 * Q + 1) \
            + 1j * np.bincount(dens_index, weights=vals.imag, minlength=2 * Q + 1)
        diff = rq - t
        pen = float(np.sum(np.abs(diff) ** 2)) + outside
        # gradient of the penalty wrt conj(psi): 2 V_D psi with D = rho_psi - rho
        Dq = diff
        VD = np.zeros(d, dtype=complex)
        np.add.at(VD, tgt, Dq[transfer] * sign * psi[src])
        g = (Hpsi - e * psi) + mu * 2.0 * (VD - np.vdot(psi, VD).real * psi)
        g = g / nrm
        return e, pen, psi, np.concatenate([2 * g.real, 2 * g.imag])

    def fun(x):
        e, pen, _, grad = evaluate(x)
        return e + mu * pen, grad

    rng = np.random.default_rng(seed)
    inits = []
    if warm_start is not None:
        inits.append(warm_start.amplitudes)
    gs = solve(spec, None, with_densities=False)
    inits.append(gs.states[0].amplitudes)
    damp = (1.0 + basis.kinetic) ** -1.0
    for _ in range(max(0, starts - len(inits))):
        inits.append((rng.standard_normal(d) + 1j * rng.standard_normal(d)) * damp)

    best = None
    for a in inits:
        x0 = np.concatenate([a.real, a.imag]) / np.linalg.norm(a)
        res = minimize(fun, x0, jac=True, method="L-BFGS-B",
                       options={"maxiter": max_iter, "ftol": 1e-15, "gtol": 1e-10})
        e, pen, psi, _ = evaluate(res.x)
        obj = e + mu * pen
        if best is None or obj < best[0]:
            best = (obj, e, pen, psi, bool(res.success), str(res.message))
    obj, e, pen, psi, ok, msg = best
    return PenaltyResult(e, obj, float(np.sqrt(pen)), ManyBodyState.normalized(basis, psi), ok,
                         "" if ok else f"descent stagnated: {msg}")


# --------------------------------------------------------------------------- certificates

@dataclass(frozen=True)
class Certificate:
    dual: float
    primal: float
    gap: float
    mismatch: float
    accepted: bool
    weak_duality: bool
    primal_source: str
    ensemble_energy: float


def primal_bound(rho: DensityField, spec: ModelSpec, penalty_mu: float = 1e4,
                 seed: int = 0) -> tuple[float, str]:
    """Upper bracket for F(rho): the explicit determinant without interaction,
    a penalized constrained search otherwise."""
    if spec.interaction.is_zero and rho.strictly_positive:
        return construct(rho).kinetic, "nrep"
    res = penalty_search(rho, spec, penalty_mu, seed=seed)
    return res.value, "penalty"


def certificate(rho: DensityField, v: PotentialClass, spec: ModelSpec, tol_rho: float = 1e-5,
                tol_cert: float = 1e-5, result: GroundStateResult | None = None,
                primal: tuple | None = None, cutoff: int | None = None) -> Certificate:
    """Duality bracket D <= F(rho) <= P for a candidate potential.

    ``cutoff`` limits the density mismatch to modes |k| <= cutoff.
    """
    gs = solve(spec, v) if result is None else result
    match = ensemble_match(rho, gs, cutoff)
    dual = gs.energy - _pair(v, rho)
    P, src = primal_bound(rho, spec) if primal is None else primal
    gap = P - dual
    weak = gap >= -WEAK_DUALITY_TOL
    if not weak:
        warnings.warn(f"weak duality violated: D - P = {-gap:.3e}", InversionWarning, stacklevel=2)
    ens = gs.energy - _pair(v, match.density)
    return Certificate(float(dual), float(P), float(gap), match.residual,
                       bool(gap <= tol_cert and match.residual <= tol_rho and weak), bool(weak),
                       src, float(ens))


def _pair(v: PotentialClass, rho: DensityField) -> float:
    from .fourier import pair
    return pair(v, rho)


# --------------------------------------------------------------------------- Lieb maximization

@dataclass(frozen=True)
class InversionOptions:
    tol_rho: float = 1e-5
    tol_cert: float = 1e-5
    max_iter: int = 500
    potential_cutoff: int | None = None
    prox: float = 0.0
    armijo: float = 1e-4
    max_backtracks: int = 40
    penalty_mu: float = 1e4
    workers: int = 1


@dataclass(frozen=True, eq=False)
class InversionResult:
    potential: PotentialClass
    dual: float
    primal: float
    gap: float
    mismatch: float
    weights: np.ndarray
    trace: list
    converged: bool
    message: str
    certificate: Certificate
    ground_state: GroundStateResult
    metadata: dict = field(default_factory=dict)

    @property
    def iterations(self) -> int:
        return len(self.trace) - 1


def _to_vector(v: PotentialClass, Kv: int) -> np.ndarray:
    c = v.function.padded(Kv).coeffs[Kv + 1:]
    return np.concatenate([c.real, c.imag])


def _to_potential(x: np.ndarray, Kv: int) -> PotentialClass:
    pos = x[:Kv] + 1j * x[Kv:]
    c = np.concatenate([np.conj(pos[::-1]), [0.0], pos])
    return PotentialClass(TorusFunction(c))


def lieb_maximize(rho: DensityField, spec: ModelSpec, opts: InversionOptions | None = None,
                  initial: PotentialClass | None = None) -> InversionResult:
    """Maximize G(v) = E(v) - <v, rho> by quasi-Newton ascent.

    Degrees of freedom are Re v_k, Im v_k for 1 <= k <= K_v (default 2K).
    The mismatch is measured on the modes |k| <= K_v, the part of the density
    the potential can act on; with the default K_v it covers every mode a
    Galerkin density can carry.
    The supergradient is 2 (Re, Im)(rho_v - rho)_k with rho_v ensemble-matched
    when the ground level is degenerate.  Steps satisfy an Armijo condition,
    so G never decreases along the trace.
    """
    opts = opts or InversionOptions()
    if rho.n_particles != spec.n_particles:
        raise DensityError("density particle count differs from the model")
    Kv = 2 * spec.cutoff if opts.potential_cutoff is None else int(opts.potential_cutoff)
    if rho.cutoff > 2 * spec.cutoff:
        raise DensityError(f"density cutoff {rho.cutoff} exceeds the Galerkin density cutoff "
                           f"{2 * spec.cutoff}")
    if rho.eta < SMALL_DENSITY * rho.n_particles:
        warnings.warn(f"density minimum {rho.eta:.3e} is close to zero; inversion is "
                      "ill-conditioned", InversionWarning, stacklevel=2)

    if initial is None:
        if spec.n_particles == 1 and rho.strictly_positive:
            initial = analytic_invert(rho, Kv)
        else:
            initial = zero_potential(Kv)
    initial = make_potential(function=initial.function, cutoff=Kv)

    ks = np.arange(1, Kv + 1)
    wts = np.concatenate([sobolev_weights(ks)] * 2)
    rho_vec = rho.function.padded(Kv).coeffs[Kv + 1:]
    rho_vec = np.concatenate([rho_vec.real, rho_vec.imag])
    mu = float(opts.prox)

    def evaluate(x):
        v = _to_potential(x, Kv).padded(max(Kv, 2 * spec.cutoff))
        gs = solve(spec, v, workers=opts.workers)
        m = ensemble_match(rho, gs, Kv)
        G = gs.energy - 2.0 * float(x @ rho_vec) - mu * float(np.sum(x ** 2 / wts))
        dv = m.density.function.padded(Kv).coeffs[Kv + 1:]
        grad = 2.0 * (np.concatenate([dv.real, dv.imag]) - rho_vec) - 2.0 * mu * x / wts
        return G, grad, gs, m

    x = _to_vector(initial, Kv)
    G, g, gs, m = evaluate(x)
    H = np.diag(np.concatenate([np.pi ** 2 * ks ** 2] * 2) / (2.0 * spec.n_particles))
    trace = [{"iter": 0, "G": G, "mismatch": m.residual, "step": 0.0}]
    converged = m.residual <= opts.tol_rho
    message = "converged" if converged else ""
    it = 0
    while not converged and it < opts.max_iter:
        it += 1
        d = H @ g
        slope = float(g @ d)
        if slope <= 0:
            H = np.diag(np.diag(H))
            d = H @ g
            slope = float(g @ d)
        step = 1.0
        accepted = False
        for _ in range(opts.max_backtracks):
            xn = x + step * d
            Gn, gn, gsn, mn = evaluate(xn)
            if Gn >= G + opts.armijo * step * slope:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            message = "line search stagnated"
            break
        s = xn - x
        y = g - gn  # gradient of -G changes by -(gn - g)
        sy = float(s @ y)
        if sy > 1e-14 * float(s @ s):
            rho_ = 1.0 / sy
            I = np.eye(s.size)
            V = I - rho_ * np.outer(s, y)
            H = V @ H @ V.T + rho_ * np.outer(s, s)
        x, G, g, gs, m = xn, Gn, gn, gsn, mn
        trace.append({"iter": it, "G": G, "mismatch": m.residual, "step": step})
        if m.residual <= opts.tol_rho:
            converged = True
            message = "converged"
    if not converged and not message:
        message = "iteration cap reached"

    v = _to_potential(x, Kv)
    full = _l2(_density_difference(m.density, rho))
    cert = certificate(rho, v, spec, opts.tol_rho, opts.tol_cert, result=gs,
                       primal=primal_bound(rho, spec, opts.penalty_mu), cutoff=Kv)
    meta = {"potential_cutoff": Kv, "prox": mu, "tol_rho": opts.tol_rho,
            "tol_cert": opts.tol_cert, "max_iter": opts.max_iter,
            "degeneracy": gs.degeneracy, "full_mismatch": full}
    return InversionResult(v, cert.dual, cert.primal, cert.gap, m.residual, m.weights, trace,
                           converged, message, cert, gs, meta)
