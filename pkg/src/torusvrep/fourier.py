"""Periodic spectral backbone on the unit torus [0, 1).

Functions are stored as truncated Fourier series

    f(x) = sum_{k=-K}^{K} c_k exp(2 pi i k x),   c_k = int_0^1 f(x) exp(-2 pi i k x) dx,

so the Laplacian has eigenvalues -4 pi^2 k^2 and every integral over the torus
is an integral over a domain of unit length.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

#: Oversampling factor (relative to 2K+1) for grid-evaluated norms.
OVERSAMPLING = 8

#: sum_k 1/(1 + 4 pi^2 k^2) = coth(1/2)/2, the squared H1 -> Linf embedding constant.
EMBEDDING_CONSTANT = float(np.sqrt(0.5 / np.tanh(0.5)))

SPACES = ("L1", "L2", "Linf", "H1", "Hminus1")


class ResolutionError(ValueError):
    """Raised when a grid is too coarse for the requested cutoff."""


@dataclass(frozen=True, eq=False)
class TorusFunction:
    """Band-limited function on the torus, held by its coefficients c_{-K..K}."""

    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=complex)
        if c.ndim != 1 or c.size % 2 != 1:
            raise ValueError("coefficient array must be 1-d with odd length 2K+1")
        c = c.copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @property
    def cutoff(self) -> int:
        return (self.coeffs.size - 1) // 2

    @property
    def modes(self) -> np.ndarray:
        K = self.cutoff
        return np.arange(-K, K + 1)

    def __getitem__(self, k: int) -> complex:
        K = self.cutoff
        if abs(k) > K:
            return 0j
        return complex(self.coeffs[k + K])

    @property
    def mean(self) -> float:
        return float(self.coeffs[self.cutoff].real)

    def padded(self, cutoff: int) -> "TorusFunction":
        """Zero-pad or truncate to a new cutoff."""
        K = self.cutoff
        if cutoff == K:
            return self
        out = np.zeros(2 * cutoff + 1, dtype=complex)
        m = min(K, cutoff)
        out[cutoff - m:cutoff + m + 1] = self.coeffs[K - m:K + m + 1]
        return TorusFunction(out)

    truncated = padded

    def is_real(self, tol: float = 1e-12) -> bool:
        c = self.coeffs
        scale = max(1.0, float(np.max(np.abs(c))) if c.size else 1.0)
        return bool(np.max(np.abs(c - np.conj(c[::-1]))) <= tol * scale)

    def samples(self, grid: int | None = None) -> np.ndarray:
        """Values at x_m = m/M; real output when the function is real."""
        return inverse(self, grid)

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        phase = np.exp(2j * np.pi * np.multiply.outer(x, self.modes))
        vals = phase @ self.coeffs
        return vals.real if self.is_real() else vals

    def _binary(self, other, op):
        if isinstance(other, TorusFunction):
            K = max(self.cutoff, other.cutoff)
            return TorusFunction(op(self.padded(K).coeffs, other.padded(K).coeffs))
        c = self.coeffs.copy()
        K = self.cutoff
        c[K] = op(c[K], other)
        return TorusFunction(c)

    def __add__(self, other):
        return self._binary(other, np.add)

    __radd__ = __add__

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __neg__(self):
        return TorusFunction(-self.coeffs)

    def __mul__(self, scalar):
        if isinstance(scalar, TorusFunction):
            return NotImplemented
        return TorusFunction(self.coeffs * scalar)

    __rmul__ = __mul__

    def __repr__(self):
        return f"TorusFunction(cutoff={self.cutoff})"


def constant(value: float, cutoff: int = 0) -> TorusFunction:
    c = np.zeros(2 * cutoff + 1, dtype=complex)
    c[cutoff] = value
    return TorusFunction(c)


def from_modes(modes: dict, cutoff: int | None = None) -> TorusFunction:
    """Build a function from a ``{k: c_k}`` mapping."""
    K = max(abs(k) for k in modes) if cutoff is None else cutoff
    c = np.zeros(2 * K + 1, dtype=complex)
    for k, val in modes.items():
        c[k + K] += val
    return TorusFunction(c)


def grid_points(M: int) -> np.ndarray:
    return np.arange(M) / M


def oversampled_size(cutoff: int, factor: int = OVERSAMPLING) -> int:
    return factor * (2 * cutoff + 1)


def transform(samples, cutoff: int | None = None) -> TorusFunction:
    """Coefficients |k| <= K from samples at M uniform points (M >= 2K+1)."""
    s = np.asarray(samples)
    if s.ndim != 1:
        raise ValueError("samples must be one-dimensional")
    M = s.size
    K = (M - 1) // 2 if cutoff is None else int(cutoff)
    if M < 2 * K + 1:
        raise ResolutionError(f"{M} samples cannot resolve cutoff {K} (need >= {2 * K + 1})")
    full = np.fft.fft(s) / M
    k = np.arange(-K, K + 1)
    return TorusFunction(full[k % M])


def inverse(f: TorusFunction, grid: int | None = None) -> np.ndarray:
    """Samples of f at M uniform points; real if f is real."""
    K = f.cutoff
    M = oversampled_size(K) if grid is None else int(grid)
    if M < 2 * K + 1:
        raise ResolutionError(f"grid of {M} points cannot hold cutoff {K}")
    buf = np.zeros(M, dtype=complex)
    buf[f.modes % M] = f.coeffs
    vals = np.fft.ifft(buf) * M
    return vals.real if f.is_real() else vals


def differentiate(f: TorusFunction, order: int = 1) -> TorusFunction:
    return TorusFunction(f.coeffs * (2j * np.pi * f.modes) ** order)


def antiderivative(f: TorusFunction) -> TorusFunction:
    """Zero-mean periodic antiderivative of f - mean(f)."""
    k = f.modes
    c = np.zeros_like(f.coeffs)
    nz = k != 0
    c[nz] = f.coeffs[nz] / (2j * np.pi * k[nz])
    return TorusFunction(c)


def sobolev_weights(modes: np.ndarray, power: int = 1) -> np.ndarray:
    return (1.0 + 4.0 * np.pi ** 2 * np.asarray(modes, dtype=float) ** 2) ** power


def _as_function(obj) -> TorusFunction:
    if isinstance(obj, TorusFunction):
        return obj
    fn = getattr(obj, "function", None)
    if isinstance(fn, TorusFunction):
        return fn
    raise TypeError(f"cannot interpret {type(obj).__name__} as a torus function")


def norm(f, space: str, oversampling: int = OVERSAMPLING) -> float:
    """Norm of ``f`` in one of L1, L2, Linf, H1, Hminus1.

    The Sobolev norms are evaluated mode by mode,
    ``||f||_{H1}^2 = sum (1 + 4 pi^2 k^2) |c_k|^2`` and
    ``||f||_{H-1}^2 = sum |c_k|^2 / (1 + 4 pi^2 k^2)``; the latter equals the
    least value of ``||u||^2 + ||w||^2`` over all splittings ``f = u + w'``.
    L1 and Linf use samples on a grid ``oversampling`` times finer than 2K+1.
    """
    f = _as_function(f)
    c2 = np.abs(f.coeffs) ** 2
    if space == "L2":
        return float(np.sqrt(c2.sum()))
    if space == "H1":
        return float(np.sqrt((sobolev_weights(f.modes) * c2).sum()))
    if space == "Hminus1":
        return float(np.sqrt((c2 / sobolev_weights(f.modes)).sum()))
    if space in ("L1", "Linf"):
        vals = np.abs(inverse(f, oversampled_size(f.cutoff, oversampling)))
        return float(vals.mean() if space == "L1" else vals.max())
    raise ValueError(f"unknown space {space!r}; expected one of {SPACES}")


def pair(v, rho) -> float:
    """Dual pairing <v, rho> = sum_k conj(v_k) rho_k = int v rho dx.

    Cutoffs may differ; the shorter series is zero-padded.
    """
    v = _as_function(v)
    rho = _as_function(rho)
    K = min(v.cutoff, rho.cutoff)
    a = v.coeffs[v.cutoff - K:v.cutoff + K + 1]
    b = rho.coeffs[rho.cutoff - K:rho.cutoff + K + 1]
    return float(np.real(np.vdot(a, b)))


def inner(f, g) -> complex:
    """L2 inner product int conj(f) g dx."""
    f = _as_function(f)
    g = _as_function(g)
    K = min(f.cutoff, g.cutoff)
    return complex(np.vdot(f.coeffs[f.cutoff - K:f.cutoff + K + 1],
                           g.coeffs[g.cutoff - K:g.cutoff + K + 1]))


def random_function(rng: np.random.Generator, cutoff: int, decay: float = 1.0,
                    real: bool = True) -> TorusFunction:
    """Random band-limited function with coefficients ~ N(0,1)/(1+|k|)^decay."""
    k = np.arange(-cutoff, cutoff + 1)
    c = (rng.standard_normal(k.size) + 1j * rng.standard_normal(k.size)) / (1.0 + np.abs(k)) ** decay
    if real:
        c = 0.5 * (c + np.conj(c[::-1]))
    return TorusFunction(c)
