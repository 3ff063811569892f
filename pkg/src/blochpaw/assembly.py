"""Assembly of the Bloch-basis matrix elements: projector-pair (D) blocks,
soft and hard two-body sectors organized by transferred momentum, and the
exchange-corrected one-body kernel.

Conventions (fixed here, validated downstream against the Fock oracle):

* ``density_fourier[Q][k][G][i][j]`` is the coefficient of the density
  fluctuation created by scattering band j at momentum k+Q into band i at
  momentum k.
* A sector is the Gram form ``kappa_Q[(k,i,j), (k',m,l)] =
  sum_t w_t conj(Ct(Q,k)[i,j]) Ct(Q,k')[m,l]`` over factor channels t
  (plane-wave modes with kernel weights, and on-site factor channels with
  sign weights), which makes sector Hermiticity structural.
* The hard channel contracts the sesquilinear form D^dagger C D; the
  conjugate sits on the bra-side D block.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dataset import BlochDataset
from .lattice import KernelSpec, flat_add, kernel_weights


@dataclass(frozen=True)
class DTensorBlock:
    """Rank-1 projector-pair block for one atom and one ordered orbital pair."""

    atom: int
    values: np.ndarray  # complex [n_a][n_a]


@dataclass(frozen=True)
class KappaSector:
    """Two-body integrals at fixed transferred momentum Q.

    ``values[k, kp, i, j, m, l]`` multiplies E_Q^{ij}(k)^dagger E_Q^{ml}(kp)
    in the momentum-sector Hamiltonian.
    """

    q_flat: int
    values: np.ndarray  # complex [N_k][N_k][N_b][N_b][N_b][N_b]
    provenance: str  # "soft" | "hard" | "full"


def assemble_d(ds: BlochDataset, a: int, k: int, i: int, q: int, j: int) -> DTensorBlock:
    """D block for orbital pair ((k,i),(q,j)) at atom a:
    values[p1][p2] = conj(P[k][i][p1]) * P[q][j][p2], thresholded."""
    site = ds.atoms[a]
    block = np.outer(np.conj(site.projector_overlaps[k, i]), site.projector_overlaps[q, j])
    thr = ds.policy.d_tensor_threshold
    if thr > 0.0:
        block = np.where(np.abs(block) < thr, 0.0, block)
    return DTensorBlock(atom=a, values=block)


def shifted_overlaps(ds: BlochDataset, a: int, q_flat: int) -> np.ndarray:
    """P[k+Q] for all k, as an array aligned with the k axis."""
    perm = [flat_add(k, q_flat, ds.mesh) for k in range(ds.n_k)]
    return ds.atoms[a].projector_overlaps[perm]


def d_blocks_for_sector(ds: BlochDataset, a: int, q_flat: int) -> np.ndarray:
    """All D blocks of sector Q at atom a: array [k][i][j][p1][p2] for the
    ordered pairs ((k,i),(k+Q,j)), with the d-tensor threshold applied."""
    p = ds.atoms[a].projector_overlaps
    p_shift = shifted_overlaps(ds, a, q_flat)
    d = np.einsum("kip,kjq->kijpq", np.conj(p), p_shift)
    thr = ds.policy.d_tensor_threshold
    if thr > 0.0:
        d = np.where(np.abs(d) < thr, 0.0, d)
    return d


def kappa_soft(ds: BlochDataset, q_flat: int, kernel: KernelSpec) -> KappaSector:
    """Soft sector from the pseudo-density Fourier coefficients,
    weighted by (4 pi / V) v'(G+Q)."""
    w = kernel_weights(ds, kernel)[:, q_flat]
    a = ds.density_fourier[q_flat]  # [k][G][i][j]
    values = np.einsum("kgij,g,pgml->kpijml", np.conj(a), w, a, optimize=True)
    return KappaSector(q_flat=q_flat, values=values, provenance="soft")


def kappa_hard(ds: BlochDataset, q_flat: int) -> KappaSector:
    """Hard sector: on-site corrections D^dagger C D summed over atoms."""
    n_k, n_b = ds.n_k, ds.n_b
    values = np.zeros((n_k, n_k, n_b, n_b, n_b, n_b), dtype=complex)
    for a in range(ds.n_atoms):
        d = d_blocks_for_sector(ds, a, q_flat)
        c = ds.atoms[a].c_tensor
        bra = np.einsum("kijpq,pqrs->kijrs", np.conj(d), c, optimize=True)
        values += np.einsum("kijrs,pmlrs->kpijml", bra, d, optimize=True)
    return KappaSector(q_flat=q_flat, values=values, provenance="hard")


def kappa_full(ds: BlochDataset, q_flat: int, kernel: KernelSpec) -> KappaSector:
    soft = kappa_soft(ds, q_flat, kernel)
    hard = kappa_hard(ds, q_flat)
    return KappaSector(q_flat=q_flat, values=soft.values + hard.values, provenance="full")


def _exchange_soft(ds: BlochDataset, w: np.ndarray) -> np.ndarray:
    """Exchange contraction per k: sum over (Q, G) of w * C(Q,k-Q)^dag C(Q,k-Q)."""
    n_k, n_b = ds.n_k, ds.n_b
    out = np.zeros((n_k, n_b, n_b), dtype=complex)
    for qf in range(n_k):
        a = ds.density_fourier[qf]
        contrib = np.einsum("kgli,g,kglj->kij", np.conj(a), w[:, qf], a, optimize=True)
        for k in range(n_k):
            out[flat_add(k, qf, ds.mesh)] += contrib[k]
    return out


def _exchange_hard(ds: BlochDataset) -> np.ndarray:
    n_k, n_b = ds.n_k, ds.n_b
    out = np.zeros((n_k, n_b, n_b), dtype=complex)
    for a in range(ds.n_atoms):
        p = ds.atoms[a].projector_overlaps
        c = ds.atoms[a].c_tensor
        a1 = np.einsum("klp,klr->pr", p, np.conj(p))
        m2 = np.einsum("pr,pqrs->qs", a1, c)
        out += np.einsum("kiq,qs,kjs->kij", np.conj(p), m2, p)
    return out


def _direct_soft(ds: BlochDataset, w: np.ndarray) -> np.ndarray:
    a0 = ds.density_fourier[0]  # Q = 0 slab
    traces = np.einsum("kgii->g", a0)
    return np.einsum("g,kgji->kij", w[:, 0] * traces, np.conj(a0))


def _direct_hard(ds: BlochDataset) -> np.ndarray:
    n_k, n_b = ds.n_k, ds.n_b
    out = np.zeros((n_k, n_b, n_b), dtype=complex)
    for a in range(ds.n_atoms):
        p = ds.atoms[a].projector_overlaps
        c = ds.atoms[a].c_tensor
        b1 = np.einsum("klr,kls->rs", np.conj(p), p)
        m3 = np.einsum("pqrs,rs->pq", c, b1)
        out += np.einsum("kjp,kiq,pq->kij", p, np.conj(p), m3)
    return out


def h_tilde(ds: BlochDataset, kernel: KernelSpec) -> np.ndarray:
    """Exchange-corrected one-body kernel entering the one-body LCU family:

        h~(k) = h(k) - 1/2 [exchange(k) - 2 direct(k)]

    where the exchange term is the pair-contraction of the two-body sectors
    and the direct term is the Q=0 trace coupling produced by squaring the
    density-mode factorization.  Hermitian per k for conjugation-paired data.
    """
    w = kernel_weights(ds, kernel)
    exch = _exchange_soft(ds, w) + _exchange_hard(ds)
    direct = _direct_soft(ds, w) + _direct_hard(ds)
    return ds.h_one_body - 0.5 * exch + direct
