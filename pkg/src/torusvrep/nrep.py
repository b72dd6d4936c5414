"""Explicit Slater determinant with a prescribed density.

For a density rho > 0 with int rho = N, the orbitals

    phi_k(x) = sqrt(rho(x)/N) exp(i k f(x)),   f(x) = (2 pi / N) int_0^x rho,

k = 0..N-1, are orthonormal (substitute u = f(x)) and their determinant has
density exactly rho.  The kinetic energy has the closed form

    T = A/2 + (2 pi^2 S / N^3) int rho^3,   S = sum_{k<N} k^2.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fourier import TorusFunction, antiderivative, grid_points, inverse, oversampled_size, transform
from .manybody import ManyBodyState, SlaterBasis
from .spaces import DensityError, DensityField


def _square_sum(N: int) -> int:
    return (N - 1) * N * (2 * N - 1) // 6


def tbound_constants(n_particles: int) -> tuple[float, float]:
    """Constants with T <= C1 + C2 * A for the constructed determinant.

    From ||rho||_inf^2 = ||sqrt(rho)||_inf^4 <= 3N^2 + 6NA and
    int rho^3 <= N ||rho||_inf^2: C1 = 6 pi^2 S, C2 = 1/2 + 12 pi^2 S / N.
    """
    N = int(n_particles)
    if N < 1:
        raise ValueError("particle count must be positive")
    S = _square_sum(N)
    return 6.0 * np.pi ** 2 * S, 0.5 + 12.0 * np.pi ** 2 * S / N


@dataclass(frozen=True, eq=False)
class NRepConstruction:
    density: DensityField
    grid: np.ndarray
    phase: np.ndarray
    orbitals: np.ndarray  # shape (N, M)
    reconstructed: np.ndarray
    kinetic: float
    kinetic_quadrature: float
    vw: float
    constants: tuple

    @property
    def n_particles(self) -> int:
        return self.density.n_particles

    @property
    def bound(self) -> float:
        c1, c2 = self.constants
        return c1 + c2 * self.vw

    def gram(self) -> np.ndarray:
        return (self.orbitals.conj() @ self.orbitals.T) / self.grid.size

    def periodicity_error(self) -> float:
        """max_k |phi_k(1) - phi_k(0)|, with the phase at x = 1 evaluated exactly."""
        P = antiderivative(self.density.function)
        N = self.n_particles
        f1 = 2 * np.pi + (2 * np.pi / N) * float(np.real(P(1.0) - P(0.0)))
        amp0 = np.sqrt(self.density.function(0.0).real / N)
        ks = np.arange(N)
        return float(np.max(np.abs(amp0 * np.exp(1j * ks * f1) - self.orbitals[:, 0])))

    def density_error(self) -> float:
        target = self.density.samples(self.grid.size)
        return float(np.max(np.abs(self.reconstructed - target)))


def construct(rho: DensityField, grid: int | None = None) -> NRepConstruction:
    """Build the orbitals on an oversampled grid and evaluate their kinetic energy."""
    if not rho.strictly_positive:
        raise DensityError(f"construction needs a strictly positive density (min {rho.eta:.3e})")
    N = rho.n_particles
    K = max(rho.cutoff, 1)
    M = oversampled_size(max(K, N)) if grid is None else int(grid)
    x = grid_points(M)
    vals = rho.samples(M)
    # f(x) = 2 pi x + (2 pi / N) (P(x) - P(0)) with P the periodic antiderivative of rho - N
    P = antiderivative(rho.function)
    Pv = inverse(P, M).real
    phase = 2 * np.pi * x + (2 * np.pi / N) * (Pv - Pv[0])
    amp = np.sqrt(vals / N)
    ks = np.arange(N)
    orbitals = amp[None, :] * np.exp(1j * ks[:, None] * phase[None, :])
    recon = N * amp ** 2 if N else vals

    S = _square_sum(N)
    A = rho.vw
    T = 0.5 * A + 2 * np.pi ** 2 * S / N ** 3 * float(np.mean(vals ** 3))
    # independent check: spectral derivatives of the sampled orbitals
    Tq = 0.0
    kk = np.fft.fftfreq(M, d=1.0 / M)
    for phi in orbitals:
        d = np.fft.ifft(2j * np.pi * kk * np.fft.fft(phi))
        Tq += 0.5 * float(np.mean(np.abs(d) ** 2))
    return NRepConstruction(rho, x, phase, orbitals, recon, float(T), Tq, A, tbound_constants(N))


def orbital_coefficients(c: NRepConstruction, cutoff: int) -> np.ndarray:
    """Plane-wave coefficients (N, 2K+1) of the orbitals, truncated at |k| <= cutoff."""
    return np.array([transform(phi, cutoff).coeffs for phi in c.orbitals])


def project_to_basis(c: NRepConstruction, basis: SlaterBasis) -> tuple[ManyBodyState, float]:
    """Project the determinant onto the Galerkin basis (spin-up orbitals).

    Returns the normalized projection and the lost weight 1 - ||P Psi||^2.
    """
    N = c.n_particles
    if basis.n_particles != N:
        raise ValueError("basis particle count differs from the density")
    need = oversampled_size(basis.cutoff)
    if c.grid.size < need:
        c = construct(c.density, grid=need)
    coeff = orbital_coefficients(c, basis.cutoff)
    # column j of ``full`` is the amplitude of the orbital on spin-orbital j
    full = np.zeros((N, basis.n_orbitals), dtype=complex)
    up = basis.orbital_spin > 0
    full[:, up] = coeff[:, basis.orbital_k[up] + basis.cutoff]
    minors = full[:, basis.dets]  # (N, n_det, N)
    amps = np.linalg.det(np.transpose(minors, (1, 0, 2)))
    weight = float(np.sum(np.abs(amps) ** 2))
    if weight == 0:
        raise ValueError("determinant has no weight in the basis")
    return ManyBodyState.normalized(basis, amps), max(0.0, 1.0 - weight)
