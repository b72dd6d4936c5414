"""Ground states of -1/2 Laplacian + W + V in the plane-wave Galerkin space.

The solver walks the conserved blocks in order of a rigorous spectral lower
bound and skips every block that cannot reach the current ground energy, so a
translation-invariant model only diagonalizes the few blocks near P = 0.
"""
from __future__ import annotations

import logging
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse.linalg as spla

from .fourier import EMBEDDING_CONSTANT, TorusFunction, norm
from .manybody import (
    DENSE_LIMIT,
    ManyBodyState,
    ModelSpec,
    assemble_block,
    build_basis,
    density_from_state,
    kinetic_energy,
    potential_is_trivial,
    potential_transfer_coefficients,
    sample_states,
)
from .fourier import pair, differentiate
from .spaces import PotentialClass, decompose_potential, make_potential

log = logging.getLogger(__name__)

DEG_REL = 1e-8
DEG_ABS = 1e-10
RESIDUAL_TOL = 1e-9
CONVERGENCE_STEP = 4
CONVERGENCE_TOL = 1e-7


class ConvergenceError(RuntimeError):
    """Iterative eigensolver failed to reach the residual tolerance."""

    def __init__(self, message, residuals=None):
        super().__init__(message)
        self.residuals = residuals


class BoundError(ValueError):
    """Requested relative bound is not attainable with the available modes."""

    def __init__(self, message, attainable):
        super().__init__(message)
        self.attainable = attainable


@dataclass(frozen=True, eq=False)
class GroundStateResult:
    energy: float
    energies: np.ndarray
    states: tuple
    densities: tuple
    gap: float
    diagnostics: dict = field(default_factory=dict)

    @property
    def degeneracy(self) -> int:
        return len(self.states)

    @property
    def density(self):
        """Density of the first ground state (the ground density when nondegenerate)."""
        return self.densities[0]

    def ensemble_density(self, weights):
        from .spaces import density_from_function
        w = np.asarray(weights, dtype=float)
        K = max(d.cutoff for d in self.densities)
        c = sum(wk * d.function.padded(K).coeffs for wk, d in zip(w, self.densities))
        return density_from_function(TorusFunction(c), self.densities[0].n_particles, check_sign=False)


# --------------------------------------------------------------------------- solving

def _block_lower_bounds(spec, basis, groups, vq, wq_bound):
    v_bound = 0.0 if vq is None else -spec.n_particles * float(np.abs(vq).sum())
    return {key: float(basis.kinetic[idx].min()) + v_bound + wq_bound for key, idx in groups.items()}


def _deterministic_start(d: int) -> np.ndarray:
    x = np.arange(d, dtype=float)
    return (1.0 + 0.1 * np.cos(0.7 * x) + 0.05 * np.sin(1.3 * x)).astype(complex)


def _eig_block(H, n_wanted: int, tol_rel: float):
    d = H.shape[0]
    if isinstance(H, np.ndarray):
        w, V = np.linalg.eigh(H)
        scale = max(1.0, float(np.max(np.abs(w))))
        return w, V, scale, "dense"
    scale = max(1.0, float(abs(H).sum(axis=1).max()))
    k = min(max(n_wanted, 6), d - 2)
    while True:
        try:
            w, V = spla.eigsh(H, k=k, which="SA", v0=_deterministic_start(d), tol=0,
                              maxiter=max(1000, 20 * d))
        except spla.ArpackNoConvergence as exc:
            raise ConvergenceError("iterative eigensolver did not converge",
                                   residuals=None) from exc
        order = np.argsort(w)
        w, V = w[order], V[:, order]
        window = w[0] + DEG_REL * abs(w[0]) + DEG_ABS
        if np.count_nonzero(w <= window) < k - 1 or k >= d - 2:
            return w, V, scale, "eigsh"
        k = min(2 * k, d - 2)


def solve(spec: ModelSpec, v: PotentialClass | None = None, use_blocks: bool = True,
          deg_rel: float = DEG_REL, deg_abs: float = DEG_ABS, prune: bool = True,
          workers: int = 1, with_densities: bool = True) -> GroundStateResult:
    """Lowest eigenvalue and the whole (near-)degenerate ground eigenspace.

    Eigenvalues within ``E0 + deg_rel*|E0| + deg_abs`` count as degenerate;
    the eigenvectors returned are orthonormal and live in the full Slater basis.
    """
    basis = build_basis(spec)
    Q = 2 * spec.cutoff
    vq = None if potential_is_trivial(v) else potential_transfer_coefficients(v, Q)
    wq = None if spec.interaction.is_zero else spec.interaction.coefficients(Q)
    by_mom = use_blocks and vq is None
    groups = basis.blocks(by_momentum=by_mom) if use_blocks else {(None, None): np.arange(basis.size)}
    w_lb = spec.interaction.lower_bound(Q, spec.n_particles)
    bounds = _block_lower_bounds(spec, basis, groups, vq, w_lb)
    order = sorted(groups, key=lambda key: (bounds[key], str(key)))

    best = np.inf
    solved = {}
    skipped = []
    batch = max(1, int(workers))

    def work(key):
        idx = groups[key]
        H = assemble_block(basis, idx, vq, wq)
        return key, _eig_block(H, 4, RESIDUAL_TOL), H

    pos = 0
    pool = ThreadPoolExecutor(batch) if batch > 1 else None
    try:
        while pos < len(order):
            chunk = []
            while pos < len(order) and len(chunk) < batch:
                key = order[pos]
                pos += 1
                thresh = best + deg_rel * abs(best) + deg_abs if np.isfinite(best) else np.inf
                if prune and bounds[key] > thresh and np.isfinite(best):
                    skipped.append(key)
                    continue
                chunk.append(key)
            results = pool.map(work, chunk) if pool else map(work, chunk)
            for key, (w, V, scale, how), H in results:
                solved[key] = (w, V, scale, how, H)
                best = min(best, float(w[0]))
    finally:
        if pool:
            pool.shutdown()
    if prune and batch > 1:
        # replay the sequential rule so the result does not depend on the batch size
        best, skipped, kept = np.inf, [], {}
        for key in order:
            thresh = best + deg_rel * abs(best) + deg_abs if np.isfinite(best) else np.inf
            if bounds[key] > thresh and np.isfinite(best):
                skipped.append(key)
                continue
            kept[key] = solved[key]
            best = min(best, float(solved[key][0][0]))
        solved = kept

    E0 = best
    window = E0 + deg_rel * abs(E0) + deg_abs
    energies, states, residuals = [], [], []
    next_level = np.inf
    for key in sorted(solved, key=lambda k: (float(solved[k][0][0]), str(k))):
        w, V, scale, how, H = solved[key]
        idx = groups[key]
        for j in range(w.size):
            if w[j] <= window:
                vec = V[:, j]
                res = float(np.linalg.norm(H @ vec - w[j] * vec))
                if res > RESIDUAL_TOL * scale:
                    raise ConvergenceError(f"residual {res:.3e} exceeds tolerance in block {key}",
                                           residuals=[res])
                residuals.append(res)
                amp = np.zeros(basis.size, dtype=complex)
                amp[idx] = vec
                energies.append(float(w[j]))
                states.append(ManyBodyState.normalized(basis, amp))
            else:
                next_level = min(next_level, float(w[j]))
                break
    for key in skipped:
        next_level = min(next_level, bounds[key])
    gap = next_level - E0
    densities = tuple(density_from_state(s) for s in states) if with_densities else ()
    diag = {
        "blocks_total": len(groups),
        "blocks_solved": len(solved),
        "blocks_pruned": len(skipped),
        "largest_block": max((len(groups[k]) for k in solved), default=0),
        "solver": sorted({solved[k][3] for k in solved}),
        "residuals": residuals,
        "gap_is_lower_bound": bool(skipped) and next_level in [bounds[k] for k in skipped],
        "by_momentum": by_mom,
        "basis_size": basis.size,
    }
    return GroundStateResult(E0, np.array(energies), tuple(states), densities, gap, diag)


def energy(spec: ModelSpec, v: PotentialClass | None = None, **kwargs) -> float:
    return solve(spec, v, with_densities=False, **kwargs).energy


# --------------------------------------------------------------------------- cutoff policy

@dataclass(frozen=True)
class CutoffStudy:
    cutoffs: tuple
    energies: tuple
    extrapolated: float
    change: float
    converged: bool


def cutoff_convergence(spec: ModelSpec, potential_at, step: int = CONVERGENCE_STEP,
                       tol: float = CONVERGENCE_TOL) -> CutoffStudy:
    """Compare E0 at K and K+step; ``potential_at(K)`` builds v for cutoff K."""
    Ks = (spec.cutoff, spec.cutoff + step)
    Es = tuple(energy(spec.with_cutoff(K), potential_at(K)) for K in Ks)
    change = abs(Es[1] - Es[0])
    return CutoffStudy(Ks, Es, Es[1], change, change < tol)


def extrapolate_energy(spec: ModelSpec, potential_at, cutoffs=(32, 64, 128, 256),
                       order: int | None = None) -> CutoffStudy:
    """Richardson extrapolation of E0 in h = 1/K.

    Galerkin energies of singular potentials approach the limit like a power
    series in 1/K; a polynomial through all sampled cutoffs is evaluated at h=0.
    """
    Ks = tuple(int(K) for K in cutoffs)
    Es = np.array([energy(spec.with_cutoff(K), potential_at(K)) for K in Ks])
    deg = len(Ks) - 1 if order is None else order
    h = 1.0 / np.array(Ks, dtype=float)
    coef = np.polynomial.polynomial.polyfit(h, Es, deg)
    limit = float(coef[0])
    if len(Ks) > deg + 1 or len(Ks) < 3:
        change = abs(limit - Es[-1])
    else:
        coef2 = np.polynomial.polynomial.polyfit(h[1:], Es[1:], deg - 1)
        change = abs(limit - coef2[0])
    return CutoffStudy(Ks, tuple(float(e) for e in Es), limit, change, change < CONVERGENCE_TOL)


# --------------------------------------------------------------------------- KLMN bounds

@dataclass(frozen=True)
class KineticBound:
    """|<v, rho_Psi>| <= a T(Psi) + b with a <= the requested epsilon."""

    eps: float
    a: float
    b: float
    mode: int
    tail_f: float
    tail_g: float


def _tail_norms(c: np.ndarray, K: int) -> np.ndarray:
    """L2 norm of the part of c beyond |k| > n, for n = 0..K."""
    e = np.abs(c) ** 2
    per = e[K:].copy()
    per[1:] += e[:K][::-1]
    per[0] = 0.0
    tails = np.concatenate([np.cumsum(per[::-1])[::-1][1:], [0.0]])
    return np.sqrt(np.maximum(tails, 0.0))


def kinetic_bound_estimate(v: PotentialClass, eps: float, spec: ModelSpec,
                           max_mode: int | None = None) -> KineticBound:
    """Explicit relative kinetic bound for a potential class.

    With the least-norm splitting v = f + g' and Fourier truncations f_n, g_n,

        |<v, rho>| <= 2 (2C||g - g_n|| + C ||f - f_n||) T
                      + N (||f_n||_inf + ||g_n'||_inf) + N (2C||g - g_n|| + C||f - f_n||),

    where C is the H1 -> Linf embedding constant.  The smallest n with a T
    prefactor <= eps is used.
    """
    if not eps > 0:
        raise ValueError("eps must be positive")
    N = spec.n_particles
    if v.is_zero:
        return KineticBound(eps, 0.0, 0.0, 0, 0.0, 0.0)
    f, g = decompose_potential(v)
    K = v.cutoff
    nmax = K if max_mode is None else min(int(max_mode), K)
    C = EMBEDDING_CONSTANT
    tf = _tail_norms(f.coeffs, K)
    tg = _tail_norms(g.coeffs, K)
    prefactor = 2.0 * (2.0 * C * tg + C * tf)
    ok = np.nonzero(prefactor[:nmax + 1] <= eps)[0]
    if ok.size == 0:
        raise BoundError(f"eps={eps} needs more than {nmax} modes; attainable "
                         f"eps is {prefactor[nmax]:.6g}", float(prefactor[nmax]))
    n = int(ok[0])
    fn, gn = f.padded(n), g.padded(n)
    sup = norm(fn, "Linf") + norm(differentiate(gn), "Linf")
    tail = 2.0 * C * tg[n] + C * tf[n]
    b = N * sup + N * tail
    return KineticBound(eps, float(prefactor[n]), float(b), n, float(tf[n]), float(tg[n]))


@dataclass(frozen=True)
class SampleReport:
    passed: bool
    samples: int
    failures: int
    worst_margin: float
    details: dict = field(default_factory=dict)


def validate_kinetic_bound(bound: KineticBound, spec: ModelSpec, v: PotentialClass,
                           samples: int = 500, seed: int = 0) -> SampleReport:
    """Check |<v, rho_Psi>| <= a T(Psi) + b on sampled normalized states."""
    rng = np.random.default_rng(seed)
    basis = build_basis(spec)
    margins = []
    for psi in sample_states(basis, rng, samples):
        rho = density_from_state(psi)
        lhs = abs(pair(v, rho))
        margins.append(bound.a * kinetic_energy(psi) + bound.b - lhs)
    m = np.array(margins)
    fails = int(np.count_nonzero(m < -1e-10))
    return SampleReport(fails == 0, samples, fails, float(m.min()))


def shifted_coercivity_check(spec: ModelSpec, v: PotentialClass | None, a: float, b: float,
                             samples: int = 500, seed: int = 0, tol: float = 1e-9) -> SampleReport:
    """Check the H1-equivalence of the shifted form on sampled states.

    With c = (1-a)/2 + b the bounds are
    ((1-a)/2)(2T+1) <= <H + c> <= max{(1+a)/2, (1-a)/2 + 2b}(2T+1).
    """
    if not a < 1:
        raise ValueError("relative bound a must be below 1")
    from .manybody import assemble
    form = assemble(spec, v)
    rng = np.random.default_rng(seed)
    basis = build_basis(spec)
    shift = (1 - a) / 2 + b
    upper_c = max((1 + a) / 2, (1 - a) / 2 + 2 * b)
    low_fail = up_fail = 0
    worst = np.inf
    for psi in sample_states(basis, rng, samples):
        T = kinetic_energy(psi)
        h = form.expectation(psi) + shift
        lo = (1 - a) / 2 * (2 * T + 1)
        hi = upper_c * (2 * T + 1)
        scale = tol * max(1.0, abs(h))
        if h < lo - scale:
            low_fail += 1
        if h > hi + scale:
            up_fail += 1
        worst = min(worst, h - lo, hi - h)
    fails = low_fail + up_fail
    return SampleReport(fails == 0, samples, fails, float(worst),
                        {"lower_failures": low_fail, "upper_failures": up_fail,
                         "shift": shift, "upper_constant": upper_c})
