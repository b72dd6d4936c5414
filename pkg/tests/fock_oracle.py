"""Independent second-quantized reference built from Jordan-Wigner matrices."""
import itertools

import numpy as np


def annihilators(n_orb):
    Z = np.diag([1.0, -1.0])
    I = np.eye(2)
    a = np.array([[0.0, 1.0], [0.0, 0.0]])
    ops = []
    for j in range(n_orb):
        m = np.array([[1.0]])
        for i in range(n_orb):
            m = np.kron(m, Z if i < j else (a if i == j else I))
        ops.append(m)
    return ops


def fock_hamiltonian(basis, vq, wq):
    """H restricted to the N-particle determinants of ``basis`` (same ordering)."""
    n = basis.n_orbitals
    c = annihilators(n)
    cd = [m.T for m in c]
    K = basis.cutoff
    Q = 2 * K
    k = basis.orbital_k
    s = basis.orbital_spin
    dim = 2 ** n
    H = np.zeros((dim, dim), dtype=complex)
    for p in range(n):
        H += 2 * np.pi ** 2 * k[p] ** 2 * cd[p] @ c[p]
        for r in range(n):
            if s[p] == s[r] and vq is not None:
                H += vq[k[p] - k[r] + Q] * cd[p] @ c[r]
    if wq is not None:
        for p, q, r, t in itertools.product(range(n), repeat=4):
            if k[p] + k[q] != k[r] + k[t] or s[p] != s[r] or s[q] != s[t]:
                continue
            H += 0.5 * wq[k[p] - k[r] + Q] * cd[p] @ cd[q] @ c[t] @ c[r]
    # basis vector for determinant (o_1<...<o_N) = cd[o_1] ... cd[o_N] |0>
    vac = np.zeros(dim)
    vac[0] = 1.0
    cols = []
    for det in basis.dets:
        vec = vac
        for o in det[::-1]:
            vec = cd[o] @ vec
        cols.append(vec)
    B = np.array(cols).T
    return B.T @ H @ B
