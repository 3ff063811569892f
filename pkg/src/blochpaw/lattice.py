"""Momentum-mesh bookkeeping: k-point indices, modular momentum arithmetic,
reciprocal-lattice vectors, and regularized Coulomb kernel values."""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum

import numpy as np

TWO_PI = 2.0 * np.pi


class LatticeError(ValueError):
    """Invalid mesh/index/geometry input."""


class MissingKernelError(KeyError):
    """A tabulated kernel value was requested but not supplied."""


@dataclass(frozen=True)
class MeshDims:
    """Dimensions (m1, m2, m3) of the uniform k-point mesh."""

    dims: tuple[int, int, int]

    def __post_init__(self):
        if len(self.dims) != 3 or any(int(m) < 1 for m in self.dims):
            raise LatticeError(f"mesh dims must be three positive integers, got {self.dims}")
        object.__setattr__(self, "dims", tuple(int(m) for m in self.dims))

    @property
    def n_k(self) -> int:
        m1, m2, m3 = self.dims
        return m1 * m2 * m3


@dataclass(frozen=True)
class KIndex:
    """A mesh point, stored both as integer coordinates and a flat row-major index."""

    coords: tuple[int, int, int]
    flat: int

    @staticmethod
    def from_coords(coords, mesh: MeshDims) -> "KIndex":
        c = tuple(int(x) for x in coords)
        for x, m in zip(c, mesh.dims):
            if not 0 <= x < m:
                raise LatticeError(f"k coordinates {c} out of range for mesh {mesh.dims}")
        m1, m2, m3 = mesh.dims
        return KIndex(c, (c[0] * m2 + c[1]) * m3 + c[2])

    @staticmethod
    def from_flat(flat: int, mesh: MeshDims) -> "KIndex":
        if not 0 <= flat < mesh.n_k:
            raise LatticeError(f"flat index {flat} out of range for mesh {mesh.dims}")
        m1, m2, m3 = mesh.dims
        c2 = flat % m3
        c1 = (flat // m3) % m2
        c0 = flat // (m2 * m3)
        return KIndex((c0, c1, c2), int(flat))


def mod_add(k: KIndex, q: KIndex, mesh: MeshDims) -> KIndex:
    """Componentwise (k + q) mod dims; the abelian group law on the mesh."""
    for idx in (k, q):
        for x, m in zip(idx.coords, mesh.dims):
            if not 0 <= x < m:
                raise LatticeError(f"index {idx.coords} out of range for mesh {mesh.dims}")
    coords = tuple((a + b) % m for a, b, m in zip(k.coords, q.coords, mesh.dims))
    return KIndex.from_coords(coords, mesh)


def mod_neg(k: KIndex, mesh: MeshDims) -> KIndex:
    """Group inverse: the mesh point q with k + q = 0 (mod dims)."""
    coords = tuple((-a) % m for a, m in zip(k.coords, mesh.dims))
    return KIndex.from_coords(coords, mesh)


def flat_add(k_flat: int, q_flat: int, mesh: MeshDims) -> int:
    return mod_add(KIndex.from_flat(k_flat, mesh), KIndex.from_flat(q_flat, mesh), mesh).flat


def flat_neg(q_flat: int, mesh: MeshDims) -> int:
    return mod_neg(KIndex.from_flat(q_flat, mesh), mesh).flat


def add_table(mesh: MeshDims) -> np.ndarray:
    """Full N_k x N_k table of flat indices for the mesh group law."""
    n = mesh.n_k
    table = np.empty((n, n), dtype=np.int64)
    for a in range(n):
        for b in range(n):
            table[a, b] = flat_add(a, b, mesh)
    return table


@dataclass(frozen=True)
class CellGeometry:
    """Real-space lattice (rows are lattice vectors, Bohr), derived reciprocal
    lattice (inverse Bohr) and cell volume (Bohr^3)."""

    lattice: np.ndarray
    recip: np.ndarray = field(init=False)
    volume: float = field(init=False)

    def __post_init__(self):
        lat = np.asarray(self.lattice, dtype=float).reshape(3, 3)
        vol = float(abs(np.linalg.det(lat)))
        if vol <= 0.0 or not np.isfinite(vol):
            raise LatticeError("lattice matrix is singular")
        object.__setattr__(self, "lattice", lat)
        object.__setattr__(self, "recip", TWO_PI * np.linalg.inv(lat.T))
        object.__setattr__(self, "volume", vol)

    def g_cart(self, miller) -> np.ndarray:
        """Cartesian reciprocal vector for integer Miller coordinates."""
        return np.asarray(miller, dtype=float) @ self.recip

    def k_cart(self, k: KIndex, mesh: MeshDims) -> np.ndarray:
        """Cartesian wavevector of a mesh point (fractional coords c_i/m_i)."""
        frac = np.array([c / m for c, m in zip(k.coords, mesh.dims)])
        return frac @ self.recip


@dataclass(frozen=True)
class GIndex:
    """A reciprocal-lattice vector: integer Miller coordinates plus its
    Cartesian form for a given geometry."""

    miller: tuple[int, int, int]
    cart: np.ndarray

    @staticmethod
    def from_miller(miller, geometry: CellGeometry) -> "GIndex":
        m = tuple(int(x) for x in miller)
        return GIndex(m, geometry.g_cart(m))


class KernelKind(str, Enum):
    BARE_ZERO_MODE_REMOVED = "bare_zero_mode_removed"
    TABULATED = "tabulated"


_ZERO_MODE_TOL = 1e-24  # |g+q|^2 below this counts as the removed zero mode


@dataclass(frozen=True)
class KernelSpec:
    """Coulomb kernel v'(G+Q). The 4*pi/V prefactor is applied by consumers.

    ``bare_zero_mode_removed`` evaluates 1/|G+Q|^2 with the divergent zero
    mode replaced by 0.  ``tabulated`` returns externally supplied values
    (e.g. a Wigner-Seitz truncated kernel) keyed by (G index, Q flat index).
    """

    kind: KernelKind = KernelKind.BARE_ZERO_MODE_REMOVED
    table: np.ndarray | None = None  # [N_pw][N_k] when kind == TABULATED

    def value(self, g_plus_q_cart, g_index: int | None = None, q_flat: int | None = None) -> float:
        if self.kind == KernelKind.BARE_ZERO_MODE_REMOVED:
            sq = float(np.dot(g_plus_q_cart, g_plus_q_cart))
            return 0.0 if sq < _ZERO_MODE_TOL else 1.0 / sq
        if self.table is None:
            raise MissingKernelError("tabulated kernel requested but no table attached")
        if g_index is None or q_flat is None:
            raise MissingKernelError("tabulated kernel lookup requires (G, Q) indices")
        n_pw, n_k = self.table.shape
        if not (0 <= g_index < n_pw and 0 <= q_flat < n_k):
            raise MissingKernelError(f"no kernel table entry for G={g_index}, Q={q_flat}")
        return float(self.table[g_index, q_flat])


def kernel_weights(ds, kernel: KernelSpec) -> np.ndarray:
    """Weights w[G, Q] = (4*pi/V) * v'(G+Q) for every stored G and mesh Q."""
    n_pw = len(ds.g_list)
    n_k = ds.mesh.n_k
    w = np.empty((n_pw, n_k), dtype=float)
    pref = 4.0 * np.pi / ds.geometry.volume
    for qf in range(n_k):
        q_cart = ds.geometry.k_cart(KIndex.from_flat(qf, ds.mesh), ds.mesh)
        for gi, g in enumerate(ds.g_list):
            w[gi, qf] = pref * kernel.value(g.cart + q_cart, gi, qf)
    return w
