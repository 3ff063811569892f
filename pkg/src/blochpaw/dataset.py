"""The Bloch-orbital dataset: container, JSON (de)serialization, validation,
deterministic synthesis, and threshold truncation.

All energies are Hartree, all lengths Bohr.  Complex arrays serialize as
nested lists of [re, im] IEEE-754 binary64 pairs.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

import numpy as np

from .lattice import (
    CellGeometry,
    GIndex,
    KernelKind,
    KernelSpec,
    KIndex,
    MeshDims,
    flat_add,
    flat_neg,
)

SCHEMA_VERSION = 1

#: 1 meV expressed in Hartree; the QPE target precision unit used in reports.
MEV_IN_HARTREE = 3.6749322e-5


class DatasetError(ValueError):
    """Schema, dimension, or invariant violation in a dataset file."""

    def __init__(self, diagnostics):
        if isinstance(diagnostics, str):
            diagnostics = [diagnostics]
        self.diagnostics = list(diagnostics)
        super().__init__("; ".join(self.diagnostics))


@dataclass(frozen=True)
class TruncationPolicy:
    """Absolute-magnitude thresholds applied before factorization.

    The no-argument constructor gives the validated production defaults;
    ``TruncationPolicy.zero()`` disables all truncation.
    """

    density_threshold: float = 1e-16
    d_tensor_threshold: float = 1e-19
    c_tensor_threshold: float = 1e-7
    eigenvalue_threshold: float = 1e-5

    def __post_init__(self):
        for name in ("density_threshold", "d_tensor_threshold", "c_tensor_threshold", "eigenvalue_threshold"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")

    @staticmethod
    def zero() -> "TruncationPolicy":
        return TruncationPolicy(0.0, 0.0, 0.0, 0.0)


@dataclass(frozen=True)
class AtomSite:
    """One augmentation site: projector overlaps P[k][j][i] = <p_i|psi_{k,j}>
    and the real on-site Coulomb correction tensor C[p1][p2][p3][p4]."""

    species: str
    n_a: int
    projector_overlaps: np.ndarray  # complex [N_k][N_b][n_a]
    c_tensor: np.ndarray  # real [n_a][n_a][n_a][n_a]


@dataclass(frozen=True)
class BlochDataset:
    """Immutable container of everything downstream modules consume."""

    geometry: CellGeometry
    mesh: MeshDims
    n_b: int
    g_list: tuple[GIndex, ...]
    atoms: tuple[AtomSite, ...]
    h_one_body: np.ndarray  # complex [N_k][N_b][N_b]
    density_fourier: np.ndarray  # complex [N_k (Q)][N_k (k)][N_pw][N_b][N_b]
    kernel_table: np.ndarray | None = None  # real [N_pw][N_k]
    policy: TruncationPolicy = field(default_factory=TruncationPolicy.zero)

    @property
    def n_k(self) -> int:
        return self.mesh.n_k

    @property
    def n_pw(self) -> int:
        return len(self.g_list)

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def n_spin_orbitals(self) -> int:
        return 2 * self.n_b * self.n_k

    def kernel(self, kind: KernelKind = KernelKind.BARE_ZERO_MODE_REMOVED) -> KernelSpec:
        if kind == KernelKind.TABULATED:
            return KernelSpec(kind=kind, table=self.kernel_table)
        return KernelSpec(kind=kind)


def _c_tensor_symmetry_residual(c: np.ndarray) -> float:
    views = [c.transpose(1, 0, 2, 3), c.transpose(0, 1, 3, 2), c.transpose(2, 3, 0, 1)]
    return max(float(np.max(np.abs(c - v))) if c.size else 0.0 for v in views)


def validate_dataset(ds: BlochDataset) -> list[str]:
    """Collect invariant violations; empty list means the dataset is valid."""
    diags: list[str] = []
    n_k, n_b, n_pw = ds.n_k, ds.n_b, ds.n_pw

    if ds.h_one_body.shape != (n_k, n_b, n_b):
        diags.append(f"dimension mismatch: h_one_body has shape {ds.h_one_body.shape}, expected {(n_k, n_b, n_b)}")
    else:
        scale = max(1.0, float(np.max(np.abs(ds.h_one_body))) if ds.h_one_body.size else 0.0)
        for k in range(n_k):
            res = float(np.max(np.abs(ds.h_one_body[k] - ds.h_one_body[k].conj().T)))
            if res > 1e-10 * scale:
                diags.append(f"Hermiticity violation at h_one_body[{k}] (residual {res:.3e})")

    expect_df = (n_k, n_k, n_pw, n_b, n_b)
    if ds.density_fourier.shape != expect_df:
        diags.append(f"dimension mismatch: density_fourier has shape {ds.density_fourier.shape}, expected {expect_df}")

    seen = set()
    for i, g in enumerate(ds.g_list):
        if g.miller in seen:
            diags.append(f"duplicate entry in g_list at index {i}: {g.miller}")
        seen.add(g.miller)

    for a, site in enumerate(ds.atoms):
        n_a = site.n_a
        if site.projector_overlaps.shape != (n_k, n_b, n_a):
            diags.append(
                f"dimension mismatch: atoms[{a}].projector_overlaps has shape "
                f"{site.projector_overlaps.shape}, expected {(n_k, n_b, n_a)}"
            )
        if site.c_tensor.shape != (n_a, n_a, n_a, n_a):
            diags.append(
                f"dimension mismatch: atoms[{a}].c_tensor has shape {site.c_tensor.shape}, "
                f"expected {(n_a, n_a, n_a, n_a)}"
            )
        elif site.c_tensor.size:
            if np.iscomplexobj(site.c_tensor):
                diags.append(f"atoms[{a}].c_tensor must be real")
            else:
                res = _c_tensor_symmetry_residual(site.c_tensor)
                scale = max(1.0, float(np.max(np.abs(site.c_tensor))))
                if res > 1e-10 * scale:
                    diags.append(f"symmetry violation at atoms[{a}].c_tensor (residual {res:.3e})")

    if ds.kernel_table is not None:
        if ds.kernel_table.shape != (n_pw, n_k):
            diags.append(
                f"dimension mismatch: kernel_table has shape {ds.kernel_table.shape}, expected {(n_pw, n_k)}"
            )
        else:
            # physical kernels are even: v'(-(G+Q)) = v'(G+Q) wherever the
            # negated mode is stored
            lookup = {g.miller: i for i, g in enumerate(ds.g_list)}
            scale = max(1.0, float(np.max(np.abs(ds.kernel_table))))
            for qf in range(n_k):
                qc = KIndex.from_flat(qf, ds.mesh).coords
                qn = flat_neg(qf, ds.mesh)
                for gi, g in enumerate(ds.g_list):
                    partner = tuple(-m - (1 if c != 0 else 0) for m, c in zip(g.miller, qc))
                    gn = lookup.get(partner)
                    if gn is not None and abs(ds.kernel_table[gi, qf] - ds.kernel_table[gn, qn]) > 1e-12 * scale:
                        diags.append(
                            f"kernel_table is not even under momentum negation at (G={gi}, Q={qf})"
                        )
                        break
                else:
                    continue
                break

    lat_vol = float(abs(np.linalg.det(ds.geometry.lattice)))
    if abs(lat_vol - ds.geometry.volume) > 1e-9 * max(1.0, lat_vol):
        diags.append("geometry volume inconsistent with lattice determinant")

    return diags


# ---------------------------------------------------------------------------
# JSON serialization


def _complex_to_json(arr: np.ndarray):
    stacked = np.stack([np.real(arr), np.imag(arr)], axis=-1)
    return stacked.tolist()


def _complex_from_json(data, shape, name) -> np.ndarray:
    arr = np.asarray(data, dtype=float)
    if arr.shape != shape + (2,):
        raise DatasetError(f"dimension mismatch: {name} has shape {arr.shape[:-1]}, expected {shape}")
    return arr[..., 0] + 1j * arr[..., 1]


def dataset_to_json_dict(ds: BlochDataset) -> dict:
    doc = {
        "schema_version": SCHEMA_VERSION,
        "geometry": {
            "lattice": [float(x) for x in ds.geometry.lattice.ravel()],
            "volume": float(ds.geometry.volume),
        },
        "mesh": list(ds.mesh.dims),
        "n_b": ds.n_b,
        "g_list": [list(g.miller) for g in ds.g_list],
        "atoms": [
            {
                "species": site.species,
                "n_a": site.n_a,
                "projector_overlaps": _complex_to_json(site.projector_overlaps),
                "c_tensor": site.c_tensor.tolist(),
            }
            for site in ds.atoms
        ],
        "h_one_body": _complex_to_json(ds.h_one_body),
        "density_fourier": _complex_to_json(ds.density_fourier),
    }
    if ds.kernel_table is not None:
        doc["kernel_table"] = ds.kernel_table.tolist()
    return doc


def save_dataset(ds: BlochDataset, path) -> None:
    with open(path, "w") as fh:
        json.dump(dataset_to_json_dict(ds), fh, separators=(",", ":"))
        fh.write("\n")


def dataset_from_json_dict(doc: dict) -> BlochDataset:
    if not isinstance(doc, dict):
        raise DatasetError("parse error: top-level JSON value is not an object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise DatasetError(f"unknown schema version: {version!r}")

    try:
        geometry = CellGeometry(np.asarray(doc["geometry"]["lattice"], dtype=float).reshape(3, 3))
        mesh = MeshDims(tuple(doc["mesh"]))
        n_b = int(doc["n_b"])
        g_entries = doc["g_list"]
        atoms_doc = doc["atoms"]
    except (KeyError, TypeError, ValueError) as exc:
        raise DatasetError(f"parse error: {exc}") from exc

    stated_vol = float(doc["geometry"].get("volume", geometry.volume))
    if abs(stated_vol - geometry.volume) > 1e-9 * max(1.0, geometry.volume):
        raise DatasetError("geometry volume inconsistent with lattice determinant")

    g_list = tuple(GIndex.from_miller(m, geometry) for m in g_entries)
    n_k, n_pw = mesh.n_k, len(g_list)

    atoms = []
    for a, entry in enumerate(atoms_doc):
        n_a = int(entry["n_a"])
        raw_c = np.asarray(entry["c_tensor"])
        if np.iscomplexobj(raw_c):
            raise DatasetError(f"atoms[{a}].c_tensor must be real")
        atoms.append(
            AtomSite(
                species=str(entry["species"]),
                n_a=n_a,
                projector_overlaps=_complex_from_json(
                    entry["projector_overlaps"], (n_k, n_b, n_a), f"atoms[{a}].projector_overlaps"
                ),
                c_tensor=raw_c.astype(float),
            )
        )

    ds = BlochDataset(
        geometry=geometry,
        mesh=mesh,
        n_b=n_b,
        g_list=g_list,
        atoms=tuple(atoms),
        h_one_body=_complex_from_json(doc["h_one_body"], (n_k, n_b, n_b), "h_one_body"),
        density_fourier=_complex_from_json(
            doc["density_fourier"], (n_k, n_k, n_pw, n_b, n_b), "density_fourier"
        ),
        kernel_table=np.asarray(doc["kernel_table"], dtype=float) if "kernel_table" in doc else None,
    )
    diags = validate_dataset(ds)
    if diags:
        raise DatasetError(diags)
    return ds


def load_dataset(path) -> BlochDataset:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DatasetError(f"parse error: {exc}") from exc
    return dataset_from_json_dict(doc)


# ---------------------------------------------------------------------------
# Synthesis


@dataclass(frozen=True)
class SynthSizes:
    """Problem sizes for synthetic datasets.  ``n_waves`` is the per-atom
    partial-wave count; ``n_atoms`` the number of augmentation sites."""

    mesh: tuple[int, int, int] = (1, 1, 1)
    n_b: int = 1
    n_atoms: int = 1
    n_waves: int = 1
    n_pw: int = 1

    @staticmethod
    def from_counts(n_k=None, mesh=None, n_b=1, n_atoms=1, n_waves=1, n_pw=1) -> "SynthSizes":
        if mesh is None:
            mesh = (int(n_k), 1, 1) if n_k is not None else (1, 1, 1)
        return SynthSizes(tuple(mesh), n_b, n_atoms, n_waves, n_pw)


def default_g_list(n_pw: int, geometry: CellGeometry) -> tuple[GIndex, ...]:
    """The zero vector followed by +/- Miller pairs ordered by Cartesian norm.

    Emitting each shell in (v, -v) pairs keeps the list closed under negation
    whenever a pair fits, which is what the conjugation pairing of the density
    coefficients needs at Q = 0.
    """
    reach = 1
    while (2 * reach + 1) ** 3 < 2 * n_pw + 1:
        reach += 1
    reps = []
    for mx in range(-reach, reach + 1):
        for my in range(-reach, reach + 1):
            for mz in range(-reach, reach + 1):
                v = (mx, my, mz)
                if v > (-mx, -my, -mz):  # keep one representative per +/- pair
                    reps.append(v)
    reps.sort(key=lambda v: (float(np.dot(geometry.g_cart(v), geometry.g_cart(v))), v))
    millers = [(0, 0, 0)]
    for v in reps:
        millers.append(v)
        millers.append((-v[0], -v[1], -v[2]))
    return tuple(GIndex.from_miller(m, geometry) for m in millers[:n_pw])


# Envelope width per supercell atom: density matrices couple bands within a
# window that widens with band folding; keeps per-block singular values
# saturating with N_b at fixed N_a.
_BAND_ENVELOPE_WIDTH = 3.0
_SYNTH_CELL_EDGE = 6.0  # Bohr, primitive cell


def _conjugate_partner(q_flat, g_index, mesh, miller_lookup, g_list):
    """Map (Q, G) to the (Q~, G~) slot holding the conjugate density entry,
    or None when G~ is not in the stored list."""
    q = KIndex.from_flat(q_flat, mesh)
    q_neg = flat_neg(q_flat, mesh)
    miller = g_list[g_index].miller
    partner = tuple(-m - (1 if c != 0 else 0) for m, c in zip(miller, q.coords))
    gi = miller_lookup.get(partner)
    if gi is None:
        return None
    return q_neg, gi


def synth_dataset(seed: int, sizes: SynthSizes, profile: str = "flat") -> BlochDataset:
    """Deterministic pseudo-random dataset satisfying every invariant.

    ``flat`` uses unit-scale entries.  ``physical`` applies the normalization
    laws that drive the asymptotic cost scalings: density Fourier coefficients
    fall off as 1/sqrt(N_a) with supercell size (keeping per-pair Coulomb
    weights of order one) while projector-overlap products fall off as 1/N_a,
    both decay as 1/sqrt(N_k) with mesh refinement, and a band-distance
    envelope widens with the atom count.
    """
    if profile not in ("flat", "physical"):
        raise ValueError(f"unknown profile {profile!r}")
    for name in ("n_b", "n_atoms", "n_waves", "n_pw"):
        if getattr(sizes, name) < 1:
            raise ValueError(f"sizes.{name} must be >= 1")
    mesh = MeshDims(sizes.mesh)
    n_k, n_b, n_pw = mesh.n_k, sizes.n_b, sizes.n_pw
    n_atoms, n_waves = sizes.n_atoms, sizes.n_waves

    rng = np.random.default_rng(np.random.PCG64(int(seed)))
    edge = _SYNTH_CELL_EDGE * n_atoms ** (1.0 / 3.0)
    geometry = CellGeometry(edge * np.eye(3))
    g_list = default_g_list(n_pw, geometry)
    miller_lookup = {g.miller: i for i, g in enumerate(g_list)}

    if profile == "physical":
        # Fourier-coefficient amplitudes fall as 1/sqrt(N_a) so each orbital
        # pair keeps an O(1) Coulomb weight as the supercell grows; projector
        # overlaps fall as 1/sqrt(N_a) so D products carry the 1/N_a law.
        # Both pick up the 1/sqrt(N_k) Bloch-normalization decay.
        df_scale = 1.0 / np.sqrt(n_atoms * n_k)
        p_scale = 0.5 / np.sqrt(n_atoms * np.sqrt(n_k))
        c_scale = 0.75
        bands = np.arange(n_b)
        envelope = np.exp(-np.abs(bands[:, None] - bands[None, :]) / (_BAND_ENVELOPE_WIDTH * n_atoms))
    else:
        df_scale = p_scale = c_scale = 1.0
        envelope = np.ones((n_b, n_b))

    def crandn(*shape):
        return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)

    h_one_body = np.empty((n_k, n_b, n_b), dtype=complex)
    for k in range(n_k):
        a = crandn(n_b, n_b)
        h_one_body[k] = 0.5 * (a + a.conj().T)

    # Density Fourier coefficients with the conjugation pairing
    #   conj(df[Q][k][G][i][j]) = df[-Q][k+Q][G~][j][i]
    # imposed orbit by orbit; slots whose partner G~ falls outside g_list are
    # zeroed so the pairing holds exactly on the stored data.
    density_fourier = np.zeros((n_k, n_k, n_pw, n_b, n_b), dtype=complex)
    for qf in range(n_k):
        for gi in range(n_pw):
            partner = _conjugate_partner(qf, gi, mesh, miller_lookup, g_list)
            if partner is None:
                continue
            qn, gn = partner
            if (qn, gn) < (qf, gi):
                continue  # filled by the partner slot
            block = crandn(n_k, n_b, n_b) * (df_scale * envelope)
            if (qn, gn) == (qf, gi):
                # self-paired slot (Q = -Q and G~ = G): Hermitian per k pair
                for kf in range(n_k):
                    kp = flat_add(kf, qf, mesh)
                    if kp == kf:
                        density_fourier[qf, kf, gi] = 0.5 * (block[kf] + block[kf].conj().T)
                    elif kp > kf:
                        density_fourier[qf, kf, gi] = block[kf]
                        density_fourier[qf, kp, gi] = block[kf].conj().T
            else:
                density_fourier[qf, :, gi] = block
                for kf in range(n_k):
                    kp = flat_add(kf, qf, mesh)
                    density_fourier[qn, kp, gn] = block[kf].conj().T

    atoms = []
    for a in range(n_atoms):
        p = crandn(n_k, n_b, n_waves) * p_scale
        raw = rng.standard_normal((n_waves,) * 4) * c_scale
        # copy each symmetry orbit from its canonical representative so the
        # pair symmetry holds bit-exactly, not merely to rounding
        t = np.empty_like(raw)
        for idx in np.ndindex(raw.shape):
            i, j, k, l = idx
            a12, b12 = min(i, j), max(i, j)
            a34, b34 = min(k, l), max(k, l)
            rep = min(((a12, b12, a34, b34), (a34, b34, a12, b12)))
            t[idx] = raw[rep]
        atoms.append(AtomSite(species=f"X{a}", n_a=n_waves, projector_overlaps=p, c_tensor=t))

    ds = BlochDataset(
        geometry=geometry,
        mesh=mesh,
        n_b=n_b,
        g_list=g_list,
        atoms=tuple(atoms),
        h_one_body=h_one_body,
        density_fourier=density_fourier,
    )
    diags = validate_dataset(ds)
    if diags:  # pragma: no cover - construction guarantees validity
        raise DatasetError(diags)
    return ds


# ---------------------------------------------------------------------------
# Truncation


def apply_truncation(ds: BlochDataset, policy: TruncationPolicy) -> BlochDataset:
    """Zero density entries and C-tensor symmetry orbits below threshold and
    record the policy for the assembly/factorization stages.  Returns a new
    dataset; the input is unchanged."""
    df = ds.density_fourier.copy()
    df[np.abs(df) < policy.density_threshold] = 0.0

    atoms = []
    for site in ds.atoms:
        c = site.c_tensor.copy()
        mag = np.abs(c)
        orbit_max = mag
        for perm in [(1, 0, 2, 3), (0, 1, 3, 2), (1, 0, 3, 2), (2, 3, 0, 1), (3, 2, 0, 1), (2, 3, 1, 0), (3, 2, 1, 0)]:
            orbit_max = np.maximum(orbit_max, mag.transpose(perm))
        c[orbit_max < policy.c_tensor_threshold] = 0.0
        atoms.append(replace(site, c_tensor=c))

    return replace(ds, density_fourier=df, atoms=tuple(atoms), policy=policy)
