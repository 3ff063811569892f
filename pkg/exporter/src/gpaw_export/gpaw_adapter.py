"""Adapter reading the exporter interface off a converged GPAW plane-wave
calculation.  GPAW is imported lazily so the rest of the package works (and
is testable) without it installed.

All radial and partial-wave integrals come from the code's PAW setups; this
module only rearranges arrays into the exporter interface.  Compensation
charges are delegated to the upstream density machinery: when unavailable,
the exported density coefficients are the bare pseudo-wavefunction products.
"""

from __future__ import annotations

import numpy as np

from .interface import AtomTensors, CalculationData

BOHR_PER_ANGSTROM = 1.8897261254578281
HA_PER_EV = 1.0 / 27.211386245988


def _require_gpaw():
    try:
        from gpaw import GPAW  # noqa: F401
    except ImportError as exc:  # pragma: no cover - environment dependent
        raise ImportError(
            "gpaw is required for GpawCalculation; install the 'gpaw' extra"
        ) from exc


def _unpack_pair_matrix(m_pp: np.ndarray, n_a: int) -> np.ndarray:
    """Packed pair-Coulomb matrix (p1 <= p2 lexicographic) to the full
    rank-4 tensor with both pair symmetries."""
    pairs = [(p, q) for p in range(n_a) for q in range(p, n_a)]
    c = np.zeros((n_a, n_a, n_a, n_a))
    for mu, (p1, p2) in enumerate(pairs):
        for nu, (p3, p4) in enumerate(pairs):
            val = float(m_pp[mu, nu])
            for a, b in {(p1, p2), (p2, p1)}:
                for d, e in {(p3, p4), (p4, p3)}:
                    c[a, b, d, e] = val
    return c


class GpawCalculation(CalculationData):
    """Wrap a restart file.  Requires a plane-wave-mode ground state."""

    def __init__(self, restart_path: str):
        _require_gpaw()
        from gpaw import GPAW

        self._calc = GPAW(restart_path, txt=None)
        self._wfs = self._calc.wfs

    def lattice(self) -> np.ndarray:
        return np.asarray(self._calc.atoms.cell) * BOHR_PER_ANGSTROM

    def mesh(self):
        return tuple(int(x) for x in self._wfs.kd.N_c)

    def n_bands(self) -> int:
        return int(self._wfs.bd.nbands)

    def converged(self) -> bool:
        return bool(getattr(self._calc.scf, "converged", False))

    def one_body(self, n_bands: int) -> np.ndarray:
        """Effective one-body matrices in the pseudo-orbital basis.

        The diagonal Kohn-Sham eigenvalues are used as the one-body kernel;
        exporting a correlated-method kernel (kinetic + ionic + frozen-core
        PAW corrections) instead requires the upstream code's integral
        machinery and replaces this method.
        """
        kd = self._wfs.kd
        n_k = kd.nibzkpts
        out = np.zeros((n_k, n_bands, n_bands), dtype=complex)
        for k in range(n_k):
            eps = self._calc.get_eigenvalues(kpt=k)[:n_bands] * HA_PER_EV
            out[k] = np.diag(eps)
        return out

    def wave_coefficients(self, k_flat: int, band: int) -> dict:
        pd = self._wfs.pd
        kpt = self._wfs.kpt_u[k_flat]
        psit_g = np.asarray(kpt.psit_nG[band])
        g_cart = pd.get_reciprocal_vectors(q=k_flat, add_q=False) / BOHR_PER_ANGSTROM
        lattice = np.asarray(self._calc.atoms.cell) * BOHR_PER_ANGSTROM
        recip = 2.0 * np.pi * np.linalg.inv(lattice.T)
        to_miller = np.linalg.inv(recip)
        out = {}
        for g, coeff in zip(g_cart, psit_g):
            miller = tuple(int(round(x)) for x in g @ to_miller)
            out[miller] = complex(coeff)
        norm = np.sqrt(sum(abs(c) ** 2 for c in out.values()))
        if norm > 0:
            out = {m: c / norm for m, c in out.items()}
        return out

    def atom_tensors(self, n_bands: int) -> list[AtomTensors]:
        kd = self._wfs.kd
        n_k = kd.nibzkpts
        sites = []
        for a, setup in enumerate(self._wfs.setups):
            n_a = setup.ni
            p = np.zeros((n_k, n_bands, n_a), dtype=complex)
            for k in range(n_k):
                p_ni = self._wfs.kpt_u[k].P_ani[a]
                p[k] = np.conj(p_ni[:n_bands, :])  # P_ani stores <psit|pt>
            mismatch = 0.0
            if hasattr(setup, "dO_ii"):
                mismatch = float(np.max(np.abs(np.asarray(setup.dO_ii))))
            sites.append(
                AtomTensors(
                    species=setup.symbol,
                    projector_overlaps=p,
                    c_tensor=_unpack_pair_matrix(np.asarray(setup.M_pp) * 1.0, n_a),
                    partial_wave_norm_mismatch=mismatch,
                )
            )
        return sites
