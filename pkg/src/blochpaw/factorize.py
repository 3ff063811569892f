"""LCU factorization: one-body eigendata, soft and hard pair-block factors,
and the on-site Coulomb tensor factorization, with rank truncation.

Pair blocks diagonalize H_J = (1/(2 i^{d_J2})) [[0, C], [(-1)^(J-1) C^+, 0]]
via the SVD of C: singular values s_i give eigenvalues +/- s_i/2 with
eigenvectors assembled from the left/right singular vectors (J=2 applies an
extra i phase on the lower half).  Rank counts retained eigenvalues of both
signs, so an untruncated block has R = 2 rank(C).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .assembly import d_blocks_for_sector, h_tilde
from .dataset import BlochDataset, TruncationPolicy
from .lattice import KernelSpec, kernel_weights


@dataclass(frozen=True)
class OneBodyFactor:
    """Eigendata of the exchange-corrected one-body kernel at one k-point.

    ``eigenvalues`` are sorted by descending magnitude; ``retained`` counts
    those at or above the eigenvalue threshold (a prefix of the sorted list).
    The rotation always keeps full size.
    """

    eigenvalues: np.ndarray  # real [N_b]
    rotation: np.ndarray  # complex [N_b][N_b], columns match eigenvalues
    retained: int

    def reconstruct(self, truncated: bool = False) -> np.ndarray:
        eps = self.eigenvalues.copy()
        if truncated:
            eps[self.retained:] = 0.0
        return (self.rotation * eps) @ self.rotation.conj().T


@dataclass(frozen=True)
class PairBlockFactor:
    """Retained eigenvalues and rotation of one 2N_b pair block.

    ``weight`` is the kernel weight (4 pi/V) v'(G+Q) for soft blocks and
    sign(eps_rs) for hard blocks (whose f already absorb sqrt|eps_rs|).
    ``sum_f`` and ``fold_trace`` are the block's contributions to the trace
    of the materialized density-mode operator for distinct-momentum and
    momentum-aliased (Q=0) scattering respectively.
    """

    key: tuple
    j: int
    f: np.ndarray  # real, retained, sorted by descending |f| then sign
    rank: int
    weight: float
    sum_f: float
    fold_trace: float | None
    rotation: np.ndarray | None  # complex [2N_b][2N_b] when kept


@dataclass(frozen=True)
class CTensorFactor:
    """Eigendecomposition of the (1/2)^delta-weighted on-site pair matrix."""

    pairs: tuple[tuple[int, int], ...]  # lexicographic p1 <= p2
    eigenvalues: np.ndarray  # real [n_pairs], sorted by descending |eps|
    o_matrix: np.ndarray  # real [n_pairs][n_pairs], columns match eigenvalues
    retained: int


@dataclass(frozen=True)
class LcuFactorization:
    one_body: tuple[OneBodyFactor, ...]
    soft_blocks: dict
    hard_blocks: dict
    c_factors: tuple[CTensorFactor, ...]
    energy_shift: float
    policy: TruncationPolicy = field(default_factory=TruncationPolicy.zero)

    def all_blocks(self):
        yield from self.soft_blocks.items()
        yield from self.hard_blocks.items()


def _fix_column_phases(mat: np.ndarray) -> np.ndarray:
    out = mat.copy()
    for c in range(out.shape[1]):
        col = out[:, c]
        idx = int(np.argmax(np.abs(col)))
        mag = abs(col[idx])
        if mag > 0.0:
            out[:, c] = col * (col[idx].conjugate() / mag)
    return out


def factor_one_body(h_matrices: np.ndarray, threshold: float) -> tuple[OneBodyFactor, ...]:
    """Eigendecompose each Hermitian h~(k); deterministic ordering by
    descending |eps| with ties broken by ascending eigenvector pivot index."""
    factors = []
    for k, h in enumerate(np.asarray(h_matrices)):
        scale = max(1.0, float(np.max(np.abs(h))))
        if float(np.max(np.abs(h - h.conj().T))) > 1e-8 * scale:
            raise ValueError(f"one-body matrix at k={k} is not Hermitian")
        eps, vecs = np.linalg.eigh(h)
        pivots = np.argmax(np.abs(vecs), axis=0)
        order = sorted(range(len(eps)), key=lambda i: (-abs(eps[i]), int(pivots[i]), i))
        eps = eps[order]
        vecs = _fix_column_phases(vecs[:, order])
        retained = int(np.sum(np.abs(eps) >= max(threshold, 0.0))) if threshold > 0 else len(eps)
        factors.append(OneBodyFactor(eigenvalues=eps, rotation=vecs, retained=retained))
    return tuple(factors)


def factor_pair_block(
    c_block: np.ndarray,
    j: int,
    threshold: float,
    key: tuple = (),
    weight: float = 1.0,
    keep_rotation: bool = True,
    aliased: bool = False,
) -> PairBlockFactor:
    """Factor one pair block.  ``aliased`` marks Q = 0 blocks, whose fold
    trace (the trace of the block scattered onto a single momentum) is also
    recorded for the energy-shift bookkeeping."""
    if j not in (1, 2):
        raise ValueError("J must be 1 or 2")
    c_block = np.asarray(c_block, dtype=complex)
    n = c_block.shape[0]
    need_uv = keep_rotation or aliased
    if need_uv:
        u, sigma, vh = np.linalg.svd(c_block)
        diag_vu = np.einsum("ij,ji->i", vh, u)  # v_i^dag u_i
    else:
        sigma = np.linalg.svd(c_block, compute_uv=False)
        diag_vu = np.zeros(n)

    entries = []  # (f, sign, svd index)
    for i, s in enumerate(sigma):
        entries.append((0.5 * s, +1, i))
        entries.append((-0.5 * s, -1, i))
    entries.sort(key=lambda e: (-abs(e[0]), 0 if e[1] > 0 else 1, e[2]))

    kept = [(f, sg, i) for f, sg, i in entries if abs(f) >= threshold and f != 0.0]
    f_vals = np.array([f for f, _, _ in kept])
    sum_f = float(np.sum(f_vals)) if kept else 0.0

    fold = None
    if aliased and need_uv:
        g = diag_vu.real if j == 1 else diag_vu.imag
        fold = float(sum(f * (1.0 + sg * g[i]) for f, sg, i in kept))
    elif aliased:
        fold = sum_f

    rotation = None
    if keep_rotation:
        phase = 1.0 if j == 1 else 1.0j
        cols = np.empty((2 * n, 2 * n), dtype=complex)
        order = kept + [e for e in entries if e not in kept]
        inv_sqrt2 = 1.0 / np.sqrt(2.0)
        for c, (_, sg, i) in enumerate(order):
            cols[:n, c] = u[:, i] * inv_sqrt2
            cols[n:, c] = sg * phase * vh[i].conj() * inv_sqrt2
        rotation = _fix_column_phases(cols)

    return PairBlockFactor(
        key=key,
        j=j,
        f=f_vals,
        rank=len(kept),
        weight=float(weight),
        sum_f=sum_f,
        fold_trace=fold,
        rotation=rotation,
    )


def pair_index(n_a: int) -> list[tuple[int, int]]:
    return [(p, q) for p in range(n_a) for q in range(p, n_a)]


def factor_c_tensor(site, threshold: float = 0.0) -> CTensorFactor:
    """Eigendecompose M[mu][nu] = (1/2)^d(mu) (1/2)^d(nu) C[mu][nu] over
    lexicographic partial-wave pairs mu = (p1 <= p2)."""
    c = np.asarray(site.c_tensor, dtype=float)
    res = max(
        float(np.max(np.abs(c - c.transpose(1, 0, 2, 3)))),
        float(np.max(np.abs(c - c.transpose(0, 1, 3, 2)))),
        float(np.max(np.abs(c - c.transpose(2, 3, 0, 1)))),
    )
    if res > 1e-8 * max(1.0, float(np.max(np.abs(c)))):
        raise ValueError("C tensor lacks the required pair symmetry")

    pairs = pair_index(site.n_a)
    m = np.empty((len(pairs), len(pairs)))
    for mu, (p1, p2) in enumerate(pairs):
        wmu = 0.5 if p1 == p2 else 1.0
        for nu, (p3, p4) in enumerate(pairs):
            wnu = 0.5 if p3 == p4 else 1.0
            m[mu, nu] = wmu * wnu * c[p1, p2, p3, p4]

    eps, vecs = np.linalg.eigh(m)
    order = sorted(range(len(eps)), key=lambda i: (-abs(eps[i]), 0 if eps[i] > 0 else 1, i))
    eps = eps[order]
    vecs = _fix_column_phases(vecs[:, order].astype(float))
    retained = int(np.sum((np.abs(eps) >= threshold) & (eps != 0.0)))
    return CTensorFactor(pairs=tuple(pairs), eigenvalues=eps, o_matrix=vecs, retained=retained)


def expanded_o_matrix(factor: CTensorFactor, n_a: int) -> np.ndarray:
    """O lifted to ordered pairs with the 2^delta diagonal-pair weight, so the
    lifted factorization sums to the bare C tensor over ordered indices."""
    out = np.zeros((n_a, n_a, len(factor.pairs)))
    for mu, (p, q) in enumerate(factor.pairs):
        w = 2.0 if p == q else 1.0
        out[p, q, :] = w * factor.o_matrix[mu, :]
        if p != q:
            out[q, p, :] = factor.o_matrix[mu, :]
    return out


def build_soft_blocks(
    ds: BlochDataset,
    policy: TruncationPolicy,
    kernel: KernelSpec,
    keep_rotations: bool = True,
) -> dict:
    """Factor the Fourier-coefficient matrix C(G,Q,k) for every mode with a
    nonzero kernel weight.  Keys are (J, G index, Q flat, k flat); blocks
    whose retained rank is zero are omitted."""
    w = kernel_weights(ds, kernel)
    blocks: dict = {}
    thr = policy.eigenvalue_threshold
    for j in (1, 2):
        for gi in range(ds.n_pw):
            for qf in range(ds.n_k):
                if w[gi, qf] == 0.0:
                    continue
                for kf in range(ds.n_k):
                    block = factor_pair_block(
                        ds.density_fourier[qf, kf, gi],
                        j,
                        thr,
                        key=(j, gi, qf, kf),
                        weight=w[gi, qf],
                        keep_rotation=keep_rotations,
                        aliased=(qf == 0),
                    )
                    if block.rank:
                        blocks[block.key] = block
    return blocks


def build_hard_blocks(
    ds: BlochDataset,
    c_factors,
    policy: TruncationPolicy,
    keep_rotations: bool = True,
) -> dict:
    """Factor the projected on-site matrices F^{a,rs}(Q,k), with sqrt|eps_rs|
    absorbed into the stored eigenvalues and sign(eps_rs) kept as the block
    weight.  Keys are (J, atom, factor index m, Q flat, k flat)."""
    blocks: dict = {}
    thr = policy.eigenvalue_threshold
    for a, factor in enumerate(c_factors):
        n_a = ds.atoms[a].n_a
        o_exp = expanded_o_matrix(factor, n_a)[:, :, : factor.retained]
        eps = factor.eigenvalues[: factor.retained]
        if not len(eps):
            continue
        scale = np.sqrt(np.abs(eps))
        for qf in range(ds.n_k):
            d = d_blocks_for_sector(ds, a, qf)
            f_mats = np.einsum("kijpq,pqm->mkij", d, o_exp, optimize=True) * scale[:, None, None, None]
            for m in range(len(eps)):
                weight = 1.0 if eps[m] >= 0.0 else -1.0
                for j in (1, 2):
                    for kf in range(ds.n_k):
                        block = factor_pair_block(
                            f_mats[m, kf],
                            j,
                            thr,
                            key=(j, a, m, qf, kf),
                            weight=weight,
                            keep_rotation=keep_rotations,
                            aliased=(qf == 0),
                        )
                        if block.rank:
                            blocks[block.key] = block
    return blocks


def _family_groups(blocks: dict):
    """Group block keys by family (everything but the trailing k index)."""
    groups: dict = {}
    for key, block in blocks.items():
        groups.setdefault(key[:-1], []).append(block)
    return groups


def energy_shift_from(one_body, soft_blocks, hard_blocks) -> float:
    """Scalar separating the block-encoded operator from the physical H:
    the one-body trace minus the squared trace content of each density-mode
    family, sum_k tr h~(k) - sum_fam (w/8) F_c^2."""
    shift = sum(float(np.sum(f.eigenvalues[: f.retained])) for f in one_body)
    for blocks in (soft_blocks, hard_blocks):
        for fam_key, members in _family_groups(blocks).items():
            qf = fam_key[-1]
            fc = 2.0 * sum((b.fold_trace if qf == 0 else b.sum_f) or 0.0 for b in members)
            shift -= members[0].weight / 8.0 * fc * fc
    return shift


def factorize_dataset(
    ds: BlochDataset,
    kernel: KernelSpec,
    policy: TruncationPolicy | None = None,
    keep_rotations: bool = True,
) -> LcuFactorization:
    """Full LCU decomposition of a dataset: one-body eigendata, C-tensor
    factors, and the soft/hard pair-block families."""
    policy = ds.policy if policy is None else policy
    h_arr = h_tilde(ds, kernel)
    one_body = factor_one_body(h_arr, policy.eigenvalue_threshold)
    c_factors = tuple(factor_c_tensor(site, policy.eigenvalue_threshold) for site in ds.atoms)
    soft = build_soft_blocks(ds, policy, kernel, keep_rotations)
    hard = build_hard_blocks(ds, c_factors, policy, keep_rotations)
    shift = energy_shift_from(one_body, soft, hard)
    return LcuFactorization(
        one_body=one_body,
        soft_blocks=soft,
        hard_blocks=hard,
        c_factors=c_factors,
        energy_shift=shift,
        policy=policy,
    )


# ---------------------------------------------------------------------------
# Serialization (CLI `factorize` output)


def _cplx(arr):
    return np.stack([np.real(arr), np.imag(arr)], axis=-1).tolist()


def _uncplx(data):
    arr = np.asarray(data, dtype=float)
    return arr[..., 0] + 1j * arr[..., 1]


def factorization_to_json_dict(fact: LcuFactorization) -> dict:
    def block_doc(b: PairBlockFactor):
        doc = {
            "key": list(b.key),
            "j": b.j,
            "f": b.f.tolist(),
            "rank": b.rank,
            "weight": b.weight,
            "sum_f": b.sum_f,
            "fold_trace": b.fold_trace,
        }
        if b.rotation is not None:
            doc["rotation"] = _cplx(b.rotation)
        return doc

    return {
        "schema_version": 1,
        "one_body": [
            {"eigenvalues": f.eigenvalues.tolist(), "rotation": _cplx(f.rotation), "retained": f.retained}
            for f in fact.one_body
        ],
        "soft_blocks": [block_doc(b) for _, b in sorted(fact.soft_blocks.items())],
        "hard_blocks": [block_doc(b) for _, b in sorted(fact.hard_blocks.items())],
        "c_factors": [
            {
                "pairs": [list(p) for p in c.pairs],
                "eigenvalues": c.eigenvalues.tolist(),
                "o_matrix": c.o_matrix.tolist(),
                "retained": c.retained,
            }
            for c in fact.c_factors
        ],
        "energy_shift": fact.energy_shift,
        "policy": {
            "density_threshold": fact.policy.density_threshold,
            "d_tensor_threshold": fact.policy.d_tensor_threshold,
            "c_tensor_threshold": fact.policy.c_tensor_threshold,
            "eigenvalue_threshold": fact.policy.eigenvalue_threshold,
        },
    }


def factorization_from_json_dict(doc: dict) -> LcuFactorization:
    def block_from(entry):
        rot = _uncplx(entry["rotation"]) if "rotation" in entry else None
        return PairBlockFactor(
            key=tuple(entry["key"]),
            j=int(entry["j"]),
            f=np.asarray(entry["f"], dtype=float),
            rank=int(entry["rank"]),
            weight=float(entry["weight"]),
            sum_f=float(entry["sum_f"]),
            fold_trace=entry.get("fold_trace"),
            rotation=rot,
        )

    one_body = tuple(
        OneBodyFactor(
            eigenvalues=np.asarray(f["eigenvalues"], dtype=float),
            rotation=_uncplx(f["rotation"]),
            retained=int(f["retained"]),
        )
        for f in doc["one_body"]
    )
    soft = {}
    for entry in doc["soft_blocks"]:
        b = block_from(entry)
        soft[b.key] = b
    hard = {}
    for entry in doc["hard_blocks"]:
        b = block_from(entry)
        hard[b.key] = b
    c_factors = tuple(
        CTensorFactor(
            pairs=tuple(tuple(p) for p in c["pairs"]),
            eigenvalues=np.asarray(c["eigenvalues"], dtype=float),
            o_matrix=np.asarray(c["o_matrix"], dtype=float),
            retained=int(c["retained"]),
        )
        for c in doc["c_factors"]
    )
    pol = doc["policy"]
    return LcuFactorization(
        one_body=one_body,
        soft_blocks=soft,
        hard_blocks=hard,
        c_factors=c_factors,
        energy_shift=float(doc["energy_shift"]),
        policy=TruncationPolicy(
            pol["density_threshold"],
            pol["d_tensor_threshold"],
            pol["c_tensor_threshold"],
            pol["eigenvalue_threshold"],
        ),
    )


def save_factorization(fact: LcuFactorization, path) -> None:
    with open(path, "w") as fh:
        json.dump(factorization_to_json_dict(fact), fh, separators=(",", ":"))
        fh.write("\n")


def load_factorization(path) -> LcuFactorization:
    with open(path) as fh:
        return factorization_from_json_dict(json.load(fh))
