"""Density and potential spaces on the torus.

Densities carry a particle number ``N`` (``int rho = N``) and the cached
quantities ``eta = min rho`` and ``A = ||d sqrt(rho)||^2``.  Potentials are
equivalence classes modulo constants, represented by their zero-mean member.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fourier import (
    OVERSAMPLING,
    TorusFunction,
    differentiate,
    inverse,
    norm,
    oversampled_size,
    sobolev_weights,
    transform,
)

#: Relative tolerance below which a grid minimum counts as touching zero.
POSITIVITY_TOL = 1e-12


class DensityError(ValueError):
    pass


class PotentialError(ValueError):
    pass


def _density_grid(f: TorusFunction, oversampling: int = OVERSAMPLING) -> int:
    return oversampled_size(max(f.cutoff, 1), oversampling)


def von_weizsacker_integral(f: TorusFunction, oversampling: int = OVERSAMPLING) -> float:
    """A = int |d sqrt(rho)|^2 = int |rho'|^2 / (4 rho), by grid quadrature.

    ``rho'`` is taken spectrally; points where ``rho`` vanishes contribute zero
    (``rho'`` vanishes there too for a nonnegative smooth density).
    """
    M = _density_grid(f, oversampling)
    rho = inverse(f, M).real
    drho = inverse(differentiate(f), M).real
    floor = POSITIVITY_TOL * max(1.0, float(np.max(np.abs(rho))))
    safe = rho > floor
    integrand = np.zeros(M)
    integrand[safe] = drho[safe] ** 2 / (4.0 * rho[safe])
    return float(integrand.mean())


@dataclass(frozen=True, eq=False)
class DensityField:
    """One-particle density: Fourier profile plus cached minimum and A."""

    n_particles: int
    function: TorusFunction
    eta: float
    vw: float

    @property
    def cutoff(self) -> int:
        return self.function.cutoff

    @property
    def coeffs(self) -> np.ndarray:
        return self.function.coeffs

    def samples(self, grid: int | None = None) -> np.ndarray:
        return inverse(self.function, grid).real

    @property
    def strictly_positive(self) -> bool:
        """eta > 0 beyond round-off on the oversampled grid."""
        scale = max(1.0, float(np.max(np.abs(self.samples()))))
        return self.eta > POSITIVITY_TOL * scale

    def padded(self, cutoff: int) -> "DensityField":
        return DensityField(self.n_particles, self.function.padded(cutoff), self.eta, self.vw)

    def __repr__(self):
        return (f"DensityField(N={self.n_particles}, cutoff={self.cutoff}, "
                f"eta={self.eta:.6g}, A={self.vw:.6g})")


def _finish_density(f: TorusFunction, n_particles: int, check_sign: bool = True,
                    oversampling: int = OVERSAMPLING) -> DensityField:
    if not f.is_real(1e-10):
        raise DensityError("density must be real")
    c = 0.5 * (f.coeffs + np.conj(f.coeffs[::-1]))
    mean = c[f.cutoff].real
    if not mean > 0:
        raise DensityError(f"density mean must be positive, got {mean}")
    f = TorusFunction(c * (n_particles / mean))
    vals = inverse(f, _density_grid(f, oversampling)).real
    eta = float(vals.min())
    if check_sign and eta < -POSITIVITY_TOL * max(1.0, float(vals.max())):
        raise DensityError(f"density takes negative values (min {eta:.3e})")
    return DensityField(int(n_particles), f, eta, von_weizsacker_integral(f, oversampling))


def make_density(n_particles: int, samples=None, coefficients=None,
                 cutoff: int | None = None) -> DensityField:
    """Build a density normalized to ``n_particles``.

    Exactly one of ``samples`` (values on a uniform grid) or ``coefficients``
    (ordered k = -K..K) must be given.
    """
    if n_particles < 1:
        raise DensityError("particle count must be positive")
    if (samples is None) == (coefficients is None):
        raise DensityError("give exactly one of samples or coefficients")
    if samples is not None:
        s = np.asarray(samples, dtype=float)
        if not np.all(np.isfinite(s)):
            raise DensityError("density samples contain NaN or inf")
        if np.any(s < 0):
            raise DensityError("density samples must be nonnegative")
        if not s.mean() > 0:
            raise DensityError("density mean must be positive")
        f = transform(s, cutoff)
    else:
        c = np.asarray(coefficients, dtype=complex)
        if not np.all(np.isfinite(c)):
            raise DensityError("density coefficients contain NaN or inf")
        f = TorusFunction(c)
        if cutoff is not None:
            f = f.padded(cutoff)
    return _finish_density(f, n_particles)


def density_from_function(f: TorusFunction, n_particles: int, check_sign: bool = True) -> DensityField:
    return _finish_density(f, n_particles, check_sign=check_sign)


@dataclass(frozen=True)
class MembershipReport:
    in_X: bool
    in_Xpos: bool
    eta: float
    A: float
    in_I_bound: float
    bound_holds: bool


def membership(rho: DensityField) -> MembershipReport:
    """Classify a density and check A <= ||rho||_{H1}^2 / (4 eta)."""
    in_xpos = rho.strictly_positive
    in_x = bool(abs(rho.function.mean - rho.n_particles) <= 1e-10 * rho.n_particles)
    if in_xpos:
        bound = norm(rho.function, "H1") ** 2 / (4.0 * rho.eta)
    else:
        bound = float("inf")
    return MembershipReport(in_X=in_x, in_Xpos=bool(in_xpos), eta=rho.eta, A=rho.vw,
                            in_I_bound=bound, bound_holds=bool(rho.vw <= bound))


# --------------------------------------------------------------------------- potentials

@dataclass(frozen=True, eq=False)
class PotentialClass:
    """Zero-mean representative of a potential modulo constants.

    ``decomposition`` optionally holds a pair (f, g) with v = f + g'.
    """

    function: TorusFunction
    decomposition: tuple | None = None

    def __post_init__(self):
        f = self.function
        if f.coeffs[f.cutoff] != 0:
            raise PotentialError("potential class representative must have zero mean")
        if self.decomposition is not None:
            u, w = self.decomposition
            K = f.cutoff
            rec = u.padded(K).coeffs + 2j * np.pi * f.modes * w.padded(K).coeffs
            rec[K] = 0.0
            scale = max(1.0, float(np.max(np.abs(f.coeffs))))
            if np.max(np.abs(rec - f.coeffs)) > 1e-12 * scale:
                raise PotentialError("decomposition does not reproduce the potential")

    @property
    def cutoff(self) -> int:
        return self.function.cutoff

    @property
    def coeffs(self) -> np.ndarray:
        return self.function.coeffs

    @property
    def is_zero(self) -> bool:
        return not np.any(self.function.coeffs)

    def padded(self, cutoff: int) -> "PotentialClass":
        return PotentialClass(self.function.padded(cutoff))

    def samples(self, grid: int | None = None) -> np.ndarray:
        return inverse(self.function, grid).real

    def __add__(self, other: "PotentialClass") -> "PotentialClass":
        return PotentialClass((self.function + other.function))

    def __sub__(self, other: "PotentialClass") -> "PotentialClass":
        return PotentialClass((self.function - other.function))

    def __mul__(self, s: float) -> "PotentialClass":
        return PotentialClass(self.function * float(s))

    __rmul__ = __mul__

    def __repr__(self):
        return f"PotentialClass(cutoff={self.cutoff})"


def make_potential(coefficients=None, samples=None, cutoff: int | None = None,
                   function: TorusFunction | None = None) -> PotentialClass:
    """Gauge-fix a real potential (drop its mean) and wrap it as a class."""
    given = [x is not None for x in (coefficients, samples, function)]
    if sum(given) != 1:
        raise PotentialError("give exactly one of coefficients, samples, function")
    if samples is not None:
        s = np.asarray(samples, dtype=float)
        if not np.all(np.isfinite(s)):
            raise PotentialError("potential samples contain NaN or inf")
        f = transform(s, cutoff)
    else:
        f = function if function is not None else TorusFunction(np.asarray(coefficients, dtype=complex))
        if not np.all(np.isfinite(f.coeffs)):
            raise PotentialError("potential coefficients contain NaN or inf")
        if cutoff is not None:
            f = f.padded(cutoff)
    if not f.is_real(1e-10):
        raise PotentialError("potential must be real (c_{-k} = conj(c_k))")
    c = 0.5 * (f.coeffs + np.conj(f.coeffs[::-1]))
    c[f.cutoff] = 0.0
    return PotentialClass(TorusFunction(c))


def zero_potential(cutoff: int) -> PotentialClass:
    return PotentialClass(TorusFunction(np.zeros(2 * cutoff + 1)))


def decompose_potential(v: PotentialClass) -> tuple[TorusFunction, TorusFunction]:
    """Least-norm splitting v = f + g' (mode by mode).

    For each k the pair (f_k, g_k) of smallest |f_k|^2 + |g_k|^2 with
    f_k + 2 pi i k g_k = v_k is f_k = v_k / (1 + 4 pi^2 k^2),
    g_k = -2 pi i k v_k / (1 + 4 pi^2 k^2).
    """
    k = v.function.modes
    w = sobolev_weights(k)
    f = TorusFunction(v.coeffs / w)
    g = TorusFunction(-2j * np.pi * k * v.coeffs / w)
    return f, g


def with_decomposition(v: PotentialClass) -> PotentialClass:
    return PotentialClass(v.function, decompose_potential(v))


def recombine(f: TorusFunction, g: TorusFunction) -> PotentialClass:
    """Gauge-fixed class of f + g'."""
    K = max(f.cutoff, g.cutoff)
    f, g = f.padded(K), g.padded(K)
    c = f.coeffs + 2j * np.pi * f.modes * g.coeffs
    c[K] = 0.0
    return PotentialClass(TorusFunction(c))


def delta_potential(strength: float, cutoff: int) -> PotentialClass:
    """Truncated delta comb: v_k = strength for 0 < |k| <= cutoff."""
    if cutoff < 1:
        raise PotentialError("delta comb needs cutoff >= 1")
    c = np.full(2 * cutoff + 1, float(strength), dtype=complex)
    c[cutoff] = 0.0
    return PotentialClass(TorusFunction(c))


def cosine_potential(amplitude: float, cutoff: int, mode: int = 1) -> PotentialClass:
    """amplitude * cos(2 pi mode x)."""
    c = np.zeros(2 * cutoff + 1, dtype=complex)
    c[cutoff + mode] = c[cutoff - mode] = amplitude / 2
    return PotentialClass(TorusFunction(c))


def delta_pairing_quadrature(phi: TorusFunction, strength: float = 1.0, nodes: int = 64) -> float:
    """Delta action through the sawtooth splitting f = 1, g = -x on [0, 1).

    Evaluates strength * (int phi + int x phi'(x) dx) with Gauss-Legendre
    quadrature on [0, 1]; the integrand is smooth on the open interval, so no
    periodicity is needed.
    """
    t, wts = np.polynomial.legendre.leggauss(nodes)
    x = 0.5 * (t + 1.0)
    wts = 0.5 * wts
    vals = np.real(phi(x))
    dvals = np.real(differentiate(phi)(x))
    return float(strength * (wts @ vals + wts @ (x * dvals)))


# --------------------------------------------------------------------------- Englisch

def englisch_profile(x, a: float, b: float, alpha: float) -> np.ndarray:
    """(a + b d(x)^(alpha+1/2))^2 with torus distance d(x) = min(x, 1-x)."""
    x = np.mod(np.asarray(x, dtype=float), 1.0)
    d = np.minimum(x, 1.0 - x)
    return (a + b * d ** (alpha + 0.5)) ** 2


def englisch_mass(a: float, b: float, alpha: float) -> float:
    """int_0^1 of the unnormalized profile, in closed form."""
    p = alpha + 0.5
    return a * a + 4 * a * b * 0.5 ** (p + 1) / (p + 1) + 2 * b * b * 0.5 ** (2 * p + 1) / (2 * p + 1)


def englisch_density(a: float, b: float, alpha: float, n_particles: int, cutoff: int,
                     quadrature_grid: int | None = None) -> DensityField:
    """Torus version of the cusp density (a + b|x|^(alpha+1/2))^2, normalized to N.

    Coefficients are taken from a fine uniform grid (default 2^16 points or more),
    then the mean is fixed analytically.
    """
    if not (a > b > 0):
        raise DensityError("need a > b > 0")
    if not (0 < alpha < 0.5):
        raise DensityError("need 0 < alpha < 1/2")
    M = quadrature_grid or max(1 << 16, 64 * (2 * cutoff + 1))
    x = np.arange(M) / M
    scale = n_particles / englisch_mass(a, b, alpha)
    f = transform(englisch_profile(x, a, b, alpha) * scale, cutoff)
    c = f.coeffs.copy()
    c[cutoff] = n_particles
    return _finish_density(TorusFunction(c), n_particles)
