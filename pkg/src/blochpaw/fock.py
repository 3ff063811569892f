"""Brute-force ground truth: dense many-body Hamiltonians on the
occupation-number basis, built two independent ways (from integrals and from
the LCU factorization), plus an explicit coefficient-enumeration one-norm.

Fermion algebra uses occupation bits directly with parity sign tracking;
SpinOrbitalOrder is the single source of truth for the bit layout.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .factorize import LcuFactorization
from .lattice import flat_add

SIZE_CAP_SPIN_ORBITALS = 14


class SizeCapError(ValueError):
    """Requested Fock build exceeds the dense-matrix size cap."""


@dataclass(frozen=True)
class SpinOrbitalOrder:
    """Bit layout: k-major, then band, then spin.
    position(k, i, sigma) = (k * n_b + i) * 2 + sigma."""

    n_k: int
    n_b: int

    @property
    def n_orbitals(self) -> int:
        return self.n_k * self.n_b

    @property
    def n_spin_orbitals(self) -> int:
        return 2 * self.n_orbitals

    def orbital(self, k: int, band: int) -> int:
        return k * self.n_b + band

    def position(self, k: int, band: int, sigma: int) -> int:
        return self.orbital(k, band) * 2 + sigma


@dataclass(frozen=True)
class FockMatrix:
    order: SpinOrbitalOrder
    matrix: np.ndarray  # complex [dim][dim]

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]


def _check_cap(order: SpinOrbitalOrder) -> int:
    n_so = order.n_spin_orbitals
    if n_so > SIZE_CAP_SPIN_ORBITALS:
        raise SizeCapError(
            f"{n_so} spin-orbitals exceeds the {SIZE_CAP_SPIN_ORBITALS}-spin-orbital dense cap"
        )
    return 1 << n_so


class _FockAlgebra:
    """Vectorized single-excitation maps a^+_P a_S over all basis states."""

    def __init__(self, order: SpinOrbitalOrder):
        self.order = order
        self.dim = _check_cap(order)
        states = np.arange(self.dim, dtype=np.int64)
        n_so = order.n_spin_orbitals
        self._occ = np.empty((n_so, self.dim), dtype=bool)
        self._par = np.empty((n_so, self.dim), dtype=np.int8)  # parity of bits below
        below = np.zeros(self.dim, dtype=np.int64)
        for p in range(n_so):
            self._occ[p] = (states >> p) & 1 == 1
            self._par[p] = np.where(below & 1, -1, 1)
            below = below + self._occ[p]
        self._states = states
        self._cache: dict = {}

    def excitation(self, p: int, s: int):
        """Apply a^+_p a_s to every basis state: (valid mask, target, sign).
        Tables are cached per (p, s); callers must not mutate them."""
        key = (p, s)
        hit = self._cache.get(key)
        if hit is not None:
            return hit
        occ, par, states = self._occ, self._par, self._states
        if p == s:
            valid = occ[s]
            result = valid, states, np.where(valid, 1, 0).astype(np.int32)
        else:
            valid = occ[s] & ~occ[p]
            mid = states ^ (1 << s)
            sign = par[s].astype(np.int32)
            # parity for p evaluated after removing s: adjust if s < p
            sign_p = par[p].astype(np.int32)
            if s < p:
                sign_p = -sign_p  # one fewer occupied bit below p
            target = mid ^ (1 << p)
            result = valid, target, sign * sign_p
        self._cache[key] = result
        return result


def _add_spin_summed_excitation(h: np.ndarray, alg: _FockAlgebra, coeff: complex, p_orb: int, s_orb: int):
    for sigma in (0, 1):
        p = 2 * p_orb + sigma
        s = 2 * s_orb + sigma
        valid, target, sign = alg.excitation(p, s)
        idx = np.nonzero(valid)[0]
        h[target[idx], idx] += coeff * sign[idx]


def _epq_table(alg: _FockAlgebra, p_orb: int, s_orb: int):
    """Spin-resolved maps for E_{p_orb, s_orb}: list of (src, dst, sign)."""
    maps = []
    for sigma in (0, 1):
        valid, target, sign = alg.excitation(2 * p_orb + sigma, 2 * s_orb + sigma)
        idx = np.nonzero(valid)[0]
        maps.append((idx, target[idx], sign[idx]))
    return maps


def build_dense(
    order: SpinOrbitalOrder,
    constant: float,
    one_body: np.ndarray,
    two_body: np.ndarray | None,
) -> FockMatrix:
    """Dense matrix of c*I + sum h[p,q] E_pq + sum T[p,q,r,s] E_pq E_rs,
    with orbital indices (k-major) and spin-summed excitations."""
    alg = _FockAlgebra(order)
    dim = alg.dim
    h = np.zeros((dim, dim), dtype=complex)
    if constant:
        h[np.diag_indices(dim)] += constant

    n_orb = order.n_orbitals
    one_body = np.asarray(one_body)
    for p in range(n_orb):
        for q in range(n_orb):
            if one_body[p, q] != 0.0:
                _add_spin_summed_excitation(h, alg, one_body[p, q], p, q)

    if two_body is not None:
        nz = np.argwhere(two_body != 0.0)
        cache: dict = {}
        for p, q, r, s in nz:
            coeff = two_body[p, q, r, s]
            if (r, s) not in cache:
                cache[(r, s)] = _epq_table(alg, int(r), int(s))
            inner = cache[(r, s)]
            for src, mid, sign1 in inner:
                for sigma in (0, 1):
                    valid2, target2, sign2 = alg.excitation(2 * int(p) + sigma, 2 * int(q) + sigma)
                    ok = valid2[mid]
                    rows = target2[mid[ok]]
                    h[rows, src[ok]] += coeff * sign1[ok] * sign2[mid[ok]]
    return FockMatrix(order=order, matrix=h)


def _blockdiag_orbital(order: SpinOrbitalOrder, per_k: np.ndarray) -> np.ndarray:
    """[N_k][N_b][N_b] per-k matrices into one orbital-space matrix."""
    n = order.n_orbitals
    out = np.zeros((n, n), dtype=complex)
    for k in range(order.n_k):
        sl = slice(k * order.n_b, (k + 1) * order.n_b)
        out[sl, sl] = per_k[k]
    return out


def fock_from_integrals(h_one_body: np.ndarray, sectors, order: SpinOrbitalOrder, mesh) -> FockMatrix:
    """Physical Hamiltonian from the one-body kernel and kappa sectors:
    sum h E + (1/2) sum kappa E^+ E with the fermionic contraction removed,
    i.e. the normal-ordered two-electron operator."""
    _check_cap(order)
    n_k, n_b = order.n_k, order.n_b
    n_orb = order.n_orbitals

    h_eff = _blockdiag_orbital(order, np.asarray(h_one_body))
    two = np.zeros((n_orb, n_orb, n_orb, n_orb), dtype=complex)

    for sector in sectors:
        qf = sector.q_flat
        v = sector.values
        # contraction term: X[k+Q][j,l] = 1/2 sum_i kappa[(k,i,j),(k,i,l)]
        contr = np.einsum("kkijil->kjl", v)
        for k in range(n_k):
            kp = flat_add(k, qf, mesh)
            sl = slice(kp * n_b, (kp + 1) * n_b)
            h_eff[sl, sl] -= 0.5 * contr[k]
        # E^+_u E_w with u = (k,i,j): E_{(k+Q,j),(k,i)} E_{(k',m),(k'+Q,l)}
        for k in range(n_k):
            kq = flat_add(k, qf, mesh)
            for k2 in range(n_k):
                k2q = flat_add(k2, qf, mesh)
                for i in range(n_b):
                    for jj in range(n_b):
                        p_orb = order.orbital(kq, jj)
                        q_orb = order.orbital(k, i)
                        for m in range(n_b):
                            for l in range(n_b):
                                val = 0.5 * v[k, k2, i, jj, m, l]
                                if val != 0.0:
                                    two[p_orb, q_orb, order.orbital(k2, m), order.orbital(k2q, l)] += val
    return build_dense(order, 0.0, h_eff, two)


def _eta_matrix(order: SpinOrbitalOrder, block_rows, mesh, q_flat: int) -> np.ndarray:
    """Scatter reconstructed pair blocks into the orbital-space matrix of the
    density-mode operator; Q = 0 folds all four quadrants onto one block."""
    n_b = order.n_b
    out = np.zeros((order.n_orbitals, order.n_orbitals), dtype=complex)
    for kf, m_rec in block_rows:
        kq = flat_add(kf, q_flat, mesh)
        a = slice(kf * n_b, (kf + 1) * n_b)
        b = slice(kq * n_b, (kq + 1) * n_b)
        out[a, a] += m_rec[:n_b, :n_b]
        out[a, b] += m_rec[:n_b, n_b:]
        out[b, a] += m_rec[n_b:, :n_b]
        out[b, b] += m_rec[n_b:, n_b:]
    return out


def fock_from_lcu(fact: LcuFactorization, order: SpinOrbitalOrder, mesh) -> FockMatrix:
    """Materialize the factorization: rotated one-body eigendata, squared
    density-mode families with their trace content split off, plus
    energy_shift * I.  Equals fock_from_integrals at zero thresholds."""
    _check_cap(order)
    n_orb = order.n_orbitals

    per_k = np.stack([f.reconstruct(truncated=True) for f in fact.one_body])
    h_eff = _blockdiag_orbital(order, per_k)
    constant = fact.energy_shift - math.fsum(float(np.trace(m).real) for m in per_k)

    two = np.zeros((n_orb, n_orb, n_orb, n_orb), dtype=complex)
    for blocks in (fact.soft_blocks, fact.hard_blocks):
        fams: dict = {}
        for key in sorted(blocks):
            fams.setdefault(key[:-1], []).append(blocks[key])
        for fam_key in sorted(fams):
            members = fams[fam_key]
            qf = fam_key[-1]
            w = members[0].weight
            rows = []
            for b in members:
                if b.rotation is None:
                    raise ValueError("fock_from_lcu requires factor rotations (keep_rotations=True)")
                cols = b.rotation[:, : b.rank]
                m_rec = (cols * b.f) @ cols.conj().T
                rows.append((b.key[-1], m_rec))
            h_eta = _eta_matrix(order, rows, mesh, qf)
            f_c = 2.0 * float(np.trace(h_eta).real)
            constant += (w / 8.0) * f_c * f_c
            h_eff += -(w / 2.0) * f_c * h_eta
            two += (w / 2.0) * np.einsum("pq,rs->pqrs", h_eta, h_eta)
    return build_dense(order, constant, h_eff, two)


def lambda_bruteforce(fact: LcuFactorization) -> float:
    """One-norm by explicit enumeration of every LCU coefficient: retained
    one-body |eps|; per-(J,Q,G) and per-(J,a,rs,Q) products |f_i(k)| |f_j(k')|
    with the same quarter prefactor as the closed-form assembly."""
    terms = [abs(float(e)) for f in fact.one_body for e in f.eigenvalues[: f.retained]]
    for blocks in (fact.soft_blocks, fact.hard_blocks):
        fams: dict = {}
        for key in sorted(blocks):
            fams.setdefault(key[:-1], []).append(blocks[key])
        for fam_key in sorted(fams):
            members = fams[fam_key]
            w = abs(members[0].weight)
            flat = [float(x) for b in members for x in b.f]
            for fi in flat:
                for fj in flat:
                    terms.append(0.25 * w * abs(fi) * abs(fj))
    return math.fsum(terms)
