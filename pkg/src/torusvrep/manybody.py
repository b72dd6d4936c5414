"""Plane-wave Slater-determinant Galerkin spaces and exact form assembly.

Spin-orbitals are plane waves exp(2 pi i k x) times an S_z eigenstate with
|k| <= K.  Determinants are sorted N-subsets of orbital indices, enumerated in
colexicographic order so that the index of a determinant is its combinatorial
rank.  Matrix elements between plane waves are exact: a potential acts through
its Fourier coefficient at the momentum transfer, which is what makes
distributional potentials (delta combs, H^-1 classes) admissible without any
smoothing.
"""
from __future__ import annotations

import itertools
import warnings
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .fourier import TorusFunction
from .spaces import DensityField, PotentialClass, density_from_function

#: Largest block handled with a dense Hermitian eigensolver.
DENSE_LIMIT = 5000


class CutoffWarning(UserWarning):
    """Potential or interaction coefficients do not cover all momentum transfers."""


class AssemblyError(RuntimeError):
    pass


# --------------------------------------------------------------------------- model

@dataclass(frozen=True, eq=False)
class Interaction:
    """Pair interaction W = sum_{i<j} w(x_i - x_j).

    kind is one of ``none``, ``delta`` (w = strength * delta), ``multiplicative``
    (w given by its Fourier series) or ``gradient`` (w = g' for a given g).
    """

    kind: str = "none"
    strength: float = 0.0
    function: TorusFunction | None = None

    def __post_init__(self):
        if self.kind not in ("none", "delta", "multiplicative", "gradient"):
            raise ValueError(f"unknown interaction kind {self.kind!r}")
        if self.kind in ("multiplicative", "gradient") and self.function is None:
            raise ValueError(f"{self.kind} interaction needs a function")

    @classmethod
    def none(cls):
        return cls("none")

    @classmethod
    def delta(cls, strength: float):
        return cls("delta", float(strength))

    @classmethod
    def multiplicative(cls, w: TorusFunction):
        return cls("multiplicative", function=w)

    @classmethod
    def gradient(cls, g: TorusFunction):
        return cls("gradient", function=g)

    @property
    def is_zero(self) -> bool:
        if self.kind == "none":
            return True
        if self.kind == "delta":
            return self.strength == 0.0
        return not np.any(self.function.coeffs)

    def coefficients(self, max_transfer: int) -> np.ndarray:
        """Exchange-symmetrized w_q for q = -max_transfer..max_transfer.

        On antisymmetric states only the even part of w is seen, so
        w_q -> (w_q + w_{-q}) / 2.
        """
        Q = max_transfer
        q = np.arange(-Q, Q + 1)
        if self.kind == "none":
            return np.zeros(q.size, dtype=complex)
        if self.kind == "delta":
            return np.full(q.size, self.strength, dtype=complex)
        fn = self.function
        if fn.cutoff < Q:
            warnings.warn(f"interaction cutoff {fn.cutoff} < max transfer {Q}; "
                          "higher transfers are dropped", CutoffWarning, stacklevel=3)
        c = fn.padded(Q).coeffs
        if self.kind == "gradient":
            c = 2j * np.pi * q * c
        return 0.5 * (c + c[::-1])

    def positive(self, max_transfer: int) -> bool:
        """True when the compressed form is positive semidefinite for sure."""
        if self.kind == "none":
            return True
        if self.kind == "delta":
            return self.strength >= 0
        w = self.coefficients(max_transfer)
        return bool(np.all(w.real >= -1e-14) and np.all(np.abs(w.imag) <= 1e-14))

    def lower_bound(self, max_transfer: int, n_particles: int) -> float:
        if self.positive(max_transfer):
            return 0.0
        pairs = n_particles * (n_particles - 1) / 2
        return -pairs * float(np.abs(self.coefficients(max_transfer)).sum())


@dataclass(frozen=True, eq=False)
class ModelSpec:
    n_particles: int
    cutoff: int
    spinful: bool = False
    interaction: Interaction = field(default_factory=Interaction.none)

    def __post_init__(self):
        if self.n_particles < 1:
            raise ValueError("need at least one particle")
        if self.cutoff < 0:
            raise ValueError("cutoff must be nonnegative")
        n_orb = (2 if self.spinful else 1) * (2 * self.cutoff + 1)
        if self.n_particles > n_orb:
            raise ValueError(f"{self.n_particles} fermions do not fit in {n_orb} orbitals")

    @property
    def n_orbitals(self) -> int:
        return (2 if self.spinful else 1) * (2 * self.cutoff + 1)

    def with_cutoff(self, cutoff: int) -> "ModelSpec":
        return ModelSpec(self.n_particles, cutoff, self.spinful, self.interaction)

    def with_interaction(self, interaction: Interaction) -> "ModelSpec":
        return ModelSpec(self.n_particles, self.cutoff, self.spinful, interaction)

    @property
    def basis(self) -> "SlaterBasis":
        return build_basis(self)


# --------------------------------------------------------------------------- basis

class SlaterBasis:
    """All N-subsets of the spin-orbitals (k, sigma), |k| <= K, in colex order."""

    def __init__(self, n_particles: int, cutoff: int, spinful: bool):
        self.n_particles = N = n_particles
        self.cutoff = K = cutoff
        self.spinful = spinful
        ks = np.arange(-K, K + 1)
        if spinful:
            self.orbital_k = np.repeat(ks, 2)
            self.orbital_spin = np.tile([1, -1], ks.size)
        else:
            self.orbital_k = ks.copy()
            self.orbital_spin = np.ones(ks.size, dtype=int)
        n = self.n_orbitals = self.orbital_k.size
        if N > n:
            raise ValueError(f"{N} fermions do not fit in {n} orbitals")
        self._binom = _binomial_table(n, N + 1)
        self.size = int(self._binom[n, N])
        dets = np.fromiter(itertools.chain.from_iterable(itertools.combinations(range(n), N)),
                           dtype=np.int64, count=self.size * N).reshape(self.size, N)
        order = np.argsort(self.rank(dets), kind="stable")
        self.dets = dets[order]
        self.dets.setflags(write=False)
        self.momentum = self.orbital_k[self.dets].sum(axis=1)
        self.twice_sz = self.orbital_spin[self.dets].sum(axis=1)
        self.kinetic = 2.0 * np.pi ** 2 * (self.orbital_k[self.dets] ** 2).sum(axis=1)
        self._singles_full = None

    def __len__(self):
        return self.size

    def __repr__(self):
        return (f"SlaterBasis(N={self.n_particles}, K={self.cutoff}, "
                f"spinful={self.spinful}, size={self.size})")

    def rank(self, sorted_dets: np.ndarray) -> np.ndarray:
        """Colex rank sum_j C(c_j, j+1) of rows of sorted orbital indices."""
        d = np.asarray(sorted_dets, dtype=np.int64)
        j = np.arange(d.shape[-1]) + 1
        return self._binom[d, j].sum(axis=-1)

    def index(self, orbitals) -> int:
        return int(self.rank(np.sort(np.asarray(orbitals))[None, :])[0])

    def orbital_index(self, k: int, spin: int = 1) -> int:
        K = self.cutoff
        if abs(k) > K:
            raise ValueError(f"momentum {k} outside cutoff {K}")
        if self.spinful:
            return 2 * (k + K) + (0 if spin > 0 else 1)
        return k + K

    def blocks(self, by_momentum: bool = True) -> dict:
        """Map block key (P or None, 2 S_z) -> sorted determinant indices."""
        mom = self.momentum if by_momentum else np.zeros(self.size, dtype=int)
        keys = np.stack([mom, self.twice_sz], axis=1)
        out = {}
        uniq, inv = np.unique(keys, axis=0, return_inverse=True)
        inv = inv.ravel()
        order = np.argsort(inv, kind="stable")
        bounds = np.searchsorted(inv[order], np.arange(len(uniq) + 1))
        for b, (P, s) in enumerate(uniq):
            key = (int(P) if by_momentum else None, int(s))
            out[key] = order[bounds[b]:bounds[b + 1]]
        return out

    # ------------------------------------------------------------ excitations
    def singles(self, source=None):
        """Spin-conserving single excitations a_p^dagger a_r acting on ``source``.

        Returns arrays (target, source, p, r, sign) covering every p with the
        spin of r, including p == r.
        """
        full = source is None
        if full and self._singles_full is not None:
            return self._singles_full
        src = np.arange(self.size) if full else np.asarray(source, dtype=np.int64)
        D = self.dets[src]
        N = self.n_particles
        allp = np.arange(self.n_orbitals)
        out = [[], [], [], [], []]
        for i in range(N):
            r = D[:, i]
            others = np.delete(D, i, axis=1)
            P = np.broadcast_to(allp, (len(src), allp.size))
            ok = self.orbital_spin[P] == self.orbital_spin[r][:, None]
            if N > 1:
                ok &= ~(others[:, :, None] == allp[None, None, :]).any(axis=1)
            rows, cols = np.nonzero(ok)
            p = allp[cols]
            oth = others[rows]
            below = oth < p[:, None]
            pos = below.sum(axis=1)
            j = np.arange(N - 1)
            rank = np.where(below, self._binom[oth, j + 1], self._binom[oth, j + 2]).sum(axis=1)
            rank = rank + self._binom[p, pos + 1]
            sign = np.where((i + pos) % 2 == 0, 1.0, -1.0)
            for lst, arr in zip(out, (rank, src[rows], p, r[rows], sign)):
                lst.append(arr)
        res = tuple(np.concatenate(a) for a in out)
        if full:
            self._singles_full = res
        return res

    def doubles(self, source, targets_mask=None):
        """Momentum- and S_z-conserving pair excitations a_p^+ a_q^+ a_s a_r, p<q, r<s.

        Returns arrays (target, source, p, q, r, s, sign).
        """
        src = np.asarray(source, dtype=np.int64)
        N = self.n_particles
        out = [[] for _ in range(7)]
        if N < 2 or src.size == 0:
            return tuple(np.zeros(0, dtype=np.int64) for _ in range(6)) + (np.zeros(0),)
        D = self.dets[src]
        pk = self._pair_tables()
        j = np.arange(N)
        for i1, i2 in itertools.combinations(range(N), 2):
            r, s = D[:, i1], D[:, i2]
            others = np.delete(D, [i1, i2], axis=1)
            kkey = self.orbital_k[r] + self.orbital_k[s]
            skey = self.orbital_spin[r] + self.orbital_spin[s]
            groups = np.stack([kkey, skey], axis=1)
            uniq, inv = np.unique(groups, axis=0, return_inverse=True)
            inv = inv.ravel()
            for g, (kk, ss) in enumerate(uniq):
                rows = np.nonzero(inv == g)[0]
                cand = pk.get((int(kk), int(ss)))
                if cand is None:
                    continue
                cp, cq = cand
                oth = others[rows]
                if N > 2:
                    clash = ((oth[:, :, None] == cp[None, None, :]) |
                             (oth[:, :, None] == cq[None, None, :])).any(axis=1)
                    rr, cc = np.nonzero(~clash)
                else:
                    rr, cc = np.divmod(np.arange(rows.size * cp.size), cp.size)
                p, q = cp[cc], cq[cc]
                o = oth[rr]
                new = np.concatenate([o, p[:, None], q[:, None]], axis=1)
                new.sort(axis=1)
                rank = self._binom[new, j + 1].sum(axis=1)
                pos_p = (o < p[:, None]).sum(axis=1)
                pos_q = (o < q[:, None]).sum(axis=1)
                parity = i1 + i2 - 1 + pos_p + pos_q
                sign = np.where(parity % 2 == 0, 1.0, -1.0)
                srow = rows[rr]
                for lst, arr in zip(out, (rank, src[srow], p, q, r[srow], s[srow], sign)):
                    lst.append(arr)
        if not out[0]:
            return tuple(np.zeros(0, dtype=np.int64) for _ in range(6)) + (np.zeros(0),)
        return tuple(np.concatenate(a) for a in out)

    def _pair_tables(self):
        if not hasattr(self, "_pairs"):
            n = self.n_orbitals
            p, q = np.triu_indices(n, k=1)
            kk = self.orbital_k[p] + self.orbital_k[q]
            ss = self.orbital_spin[p] + self.orbital_spin[q]
            table = {}
            keys = np.stack([kk, ss], axis=1)
            uniq, inv = np.unique(keys, axis=0, return_inverse=True)
            inv = inv.ravel()
            for g, (a, b) in enumerate(uniq):
                sel = inv == g
                table[(int(a), int(b))] = (p[sel], q[sel])
            self._pairs = table
        return self._pairs


def _binomial_table(n: int, r: int) -> np.ndarray:
    t = np.zeros((n + 2, r + 2), dtype=np.int64)
    t[:, 0] = 1
    for i in range(1, n + 2):
        t[i, 1:] = t[i - 1, 1:] + t[i - 1, :-1]
    return t


@lru_cache(maxsize=16)
def _basis_cached(n_particles: int, cutoff: int, spinful: bool) -> SlaterBasis:
    return SlaterBasis(n_particles, cutoff, spinful)


def build_basis(spec: ModelSpec) -> SlaterBasis:
    return _basis_cached(spec.n_particles, spec.cutoff, spec.spinful)


# --------------------------------------------------------------------------- states

@dataclass(frozen=True, eq=False)
class ManyBodyState:
    basis: SlaterBasis
    amplitudes: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.amplitudes, dtype=complex)
        if a.shape != (self.basis.size,):
            raise ValueError("amplitude vector does not match the basis")
        nrm = np.linalg.norm(a)
        if abs(nrm - 1.0) > 1e-12:
            raise ValueError(f"state is not normalized (norm {nrm})")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "amplitudes", a)

    @classmethod
    def normalized(cls, basis: SlaterBasis, amplitudes) -> "ManyBodyState":
        a = np.asarray(amplitudes, dtype=complex)
        return cls(basis, a / np.linalg.norm(a))

    @classmethod
    def determinant(cls, basis: SlaterBasis, orbitals) -> "ManyBodyState":
        a = np.zeros(basis.size, dtype=complex)
        a[basis.index(orbitals)] = 1.0
        return cls(basis, a)

    @classmethod
    def plane_waves(cls, basis: SlaterBasis, momenta, spins=None) -> "ManyBodyState":
        spins = [1] * len(momenta) if spins is None else spins
        orbs = [basis.orbital_index(k, s) for k, s in zip(momenta, spins)]
        return cls.determinant(basis, orbs)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))


def one_body_density_coefficients(state: ManyBodyState) -> np.ndarray:
    """rho_q for q = -2K..2K from the one-body reduced density matrix."""
    basis = state.basis
    c = state.amplitudes
    support = np.nonzero(c)[0]
    if support.size == basis.size:
        tgt, src, p, r, sign = basis.singles()
    else:
        tgt, src, p, r, sign = basis.singles(support)
    vals = np.conj(c[tgt]) * sign * c[src]
    Q = 2 * basis.cutoff
    q = basis.orbital_k[r] - basis.orbital_k[p] + Q
    rho = np.bincount(q, weights=vals.real, minlength=2 * Q + 1) \
        + 1j * np.bincount(q, weights=vals.imag, minlength=2 * Q + 1)
    return rho


def density_from_state(state: ManyBodyState) -> DensityField:
    rho = one_body_density_coefficients(state)
    rho = 0.5 * (rho + np.conj(rho[::-1]))
    return density_from_function(TorusFunction(rho), state.basis.n_particles, check_sign=False)


def kinetic_energy(state: ManyBodyState) -> float:
    return float(np.dot(np.abs(state.amplitudes) ** 2, state.basis.kinetic))


# --------------------------------------------------------------------------- assembly

@dataclass(frozen=True, eq=False)
class Block:
    key: tuple
    indices: np.ndarray
    matrix: object  # dense ndarray or scipy sparse matrix

    @property
    def size(self) -> int:
        return self.indices.size

    @property
    def is_dense(self) -> bool:
        return isinstance(self.matrix, np.ndarray)


@dataclass(frozen=True, eq=False)
class FormMatrix:
    """Hermitian Galerkin matrix of <Phi, H Psi>, stored block by block."""

    basis: SlaterBasis
    blocks: tuple
    by_momentum: bool

    def full(self) -> np.ndarray:
        H = np.zeros((self.basis.size, self.basis.size), dtype=complex)
        for b in self.blocks:
            m = b.matrix if b.is_dense else b.matrix.toarray()
            H[np.ix_(b.indices, b.indices)] = m
        return H

    def apply(self, amplitudes: np.ndarray) -> np.ndarray:
        out = np.zeros(self.basis.size, dtype=complex)
        for b in self.blocks:
            out[b.indices] = b.matrix @ amplitudes[b.indices]
        return out

    def expectation(self, state: ManyBodyState) -> float:
        return float(np.vdot(state.amplitudes, self.apply(state.amplitudes)).real)


def potential_is_trivial(v: PotentialClass | None) -> bool:
    return v is None or v.is_zero


def block_keys_for(spec: ModelSpec, v: PotentialClass | None, use_blocks: bool = True):
    """Which conserved quantities separate the Galerkin matrix."""
    if not use_blocks:
        return None
    return potential_is_trivial(v)


def potential_transfer_coefficients(v: PotentialClass | None, max_transfer: int,
                                    warn: bool = True) -> np.ndarray:
    Q = max_transfer
    if v is None:
        return np.zeros(2 * Q + 1, dtype=complex)
    if warn and v.cutoff < Q:
        warnings.warn(f"potential cutoff {v.cutoff} < max momentum transfer {Q}; "
                      "higher transfers are dropped", CutoffWarning, stacklevel=3)
    return v.function.padded(Q).coeffs


def assemble_block(basis: SlaterBasis, indices: np.ndarray, vq: np.ndarray | None,
                   wq: np.ndarray | None, dense: bool | None = None):
    """Galerkin matrix restricted to the determinants ``indices``.

    ``vq``/``wq`` hold potential and symmetrized pair-interaction coefficients
    for transfers -2K..2K (``None`` when absent).
    """
    idx = np.asarray(indices, dtype=np.int64)
    d = idx.size
    local = np.full(basis.size, -1, dtype=np.int64)
    local[idx] = np.arange(d)
    Q = 2 * basis.cutoff
    rows = [np.arange(d)]
    cols = [np.arange(d)]
    vals = [basis.kinetic[idx].astype(complex)]
    if vq is not None and np.any(vq):
        tgt, src, p, r, sign = basis.singles(idx)
        keep = (local[tgt] >= 0) & (p != r)
        tq = basis.orbital_k[p[keep]] - basis.orbital_k[r[keep]] + Q
        rows.append(local[tgt[keep]])
        cols.append(local[src[keep]])
        vals.append(vq[tq] * sign[keep])
    if wq is not None and np.any(wq) and basis.n_particles > 1:
        tgt, src, p, q, r, s, sign = basis.doubles(idx)
        keep = local[tgt] >= 0
        tgt, src, p, q, r, s, sign = (a[keep] for a in (tgt, src, p, q, r, s, sign))
        kp, kq, kr, ks = (basis.orbital_k[a] for a in (p, q, r, s))
        sp_, sq, sr, ss = (basis.orbital_spin[a] for a in (p, q, r, s))
        direct = np.where((sp_ == sr) & (sq == ss), wq[kp - kr + Q], 0.0)
        exchange = np.where((sp_ == ss) & (sq == sr), wq[kp - ks + Q], 0.0)
        amp = (direct - exchange) * sign
        nz = amp != 0
        rows.append(local[tgt[nz]])
        cols.append(local[src[nz]])
        vals.append(amp[nz])
    R = np.concatenate(rows)
    C = np.concatenate(cols)
    V = np.concatenate(vals)
    if dense is None:
        dense = d <= DENSE_LIMIT
    if dense:
        H = np.zeros((d, d), dtype=complex)
        np.add.at(H, (R, C), V)
        err = np.max(np.abs(H - H.conj().T)) if d else 0.0
        scale = max(1.0, np.max(np.abs(H)) if d else 1.0)
    else:
        H = sp.coo_matrix((V, (R, C)), shape=(d, d)).tocsr()
        H.sum_duplicates()
        diff = (H - H.conj().T)
        err = np.max(np.abs(diff.data)) if diff.nnz else 0.0
        scale = max(1.0, np.max(np.abs(H.data)))
    if err > 1e-12 * scale:
        raise AssemblyError(f"assembled block is not Hermitian (defect {err:.3e})")
    return H


def assemble(spec: ModelSpec, v: PotentialClass | None = None, use_blocks: bool = True,
             keys=None) -> FormMatrix:
    """Exact Galerkin matrix of -1/2 Laplacian + W + V over the Slater basis.

    Blocks follow the conserved quantities: 2 S_z always, total momentum as
    well when ``v`` vanishes.  ``keys`` restricts assembly to selected blocks.
    """
    basis = build_basis(spec)
    Q = 2 * spec.cutoff
    vq = None if potential_is_trivial(v) else potential_transfer_coefficients(v, Q)
    wq = None if spec.interaction.is_zero else spec.interaction.coefficients(Q)
    by_mom = use_blocks and vq is None
    if use_blocks:
        groups = basis.blocks(by_momentum=by_mom)
    else:
        groups = {(None, None): np.arange(basis.size)}
    if keys is not None:
        groups = {k: groups[k] for k in keys}
    blocks = tuple(Block(k, idx, assemble_block(basis, idx, vq, wq)) for k, idx in groups.items())
    return FormMatrix(basis, blocks, by_mom)


def kinetic_form(spec: ModelSpec) -> np.ndarray:
    return build_basis(spec).kinetic.copy()


def sample_states(basis: SlaterBasis, rng: np.random.Generator, count: int,
                  decay: float = 1.0) -> list:
    """Random normalized states of mixed character.

    Cycles through dense Gaussian vectors damped by (1 + T_I)^(-decay/2),
    single determinants, and sparse superpositions of a few determinants.
    """
    out = []
    damp = (1.0 + basis.kinetic) ** (-0.5 * decay)
    for i in range(count):
        kind = i % 3
        if kind == 0:
            a = (rng.standard_normal(basis.size) + 1j * rng.standard_normal(basis.size)) * damp
        elif kind == 1:
            a = np.zeros(basis.size, dtype=complex)
            a[rng.integers(basis.size)] = np.exp(2j * np.pi * rng.random())
        else:
            a = np.zeros(basis.size, dtype=complex)
            pick = rng.choice(basis.size, size=min(4, basis.size), replace=False)
            a[pick] = rng.standard_normal(pick.size) + 1j * rng.standard_normal(pick.size)
        out.append(ManyBodyState.normalized(basis, a))
    return out
