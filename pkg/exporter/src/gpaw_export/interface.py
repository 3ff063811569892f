"""The narrow calculation interface the exporter consumes.

Any object with these methods can drive an export: the production adapter
wraps a converged GPAW calculation, and tests use a synthetic stub.  All
quantities are atomic units (Hartree, Bohr); wavefunction coefficients are
indexed by integer Miller vectors of the reciprocal lattice.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AtomTensors:
    """Per-site PAW data: projector overlaps P[k][band][i] = <p_i|psi_{k,band}>
    and the real on-site pair-Coulomb correction tensor."""

    species: str
    projector_overlaps: np.ndarray  # complex [N_k][n_bands][n_a]
    c_tensor: np.ndarray  # real [n_a][n_a][n_a][n_a]
    partial_wave_norm_mismatch: float = 0.0  # max |<phi|phi> - <phit|phit>|


class CalculationData:
    """Duck-typed protocol; documented here, implemented by adapters."""

    def lattice(self) -> np.ndarray:  # [3][3] rows, Bohr
        raise NotImplementedError

    def mesh(self) -> tuple[int, int, int]:
        raise NotImplementedError

    def n_bands(self) -> int:
        raise NotImplementedError

    def converged(self) -> bool:
        raise NotImplementedError

    def one_body(self, n_bands: int) -> np.ndarray:
        """Total one-body matrices [N_k][n][n] including PAW corrections."""
        raise NotImplementedError

    def wave_coefficients(self, k_flat: int, band: int) -> dict:
        """Pseudo-wavefunction plane-wave coefficients keyed by Miller triple."""
        raise NotImplementedError

    def compensation_coefficients(self, q_flat: int, k_flat: int) -> dict | None:
        """Optional compensation-charge Fourier coefficients per band pair,
        keyed by Miller triple with values shaped [n][n]; None when the
        upstream code folded them into the wavefunction product already."""
        return None

    def atom_tensors(self, n_bands: int) -> list[AtomTensors]:
        raise NotImplementedError

    def kernel_table(self, g_millers, recip) -> np.ndarray | None:
        """Optional regularized Coulomb kernel values [N_pw][N_k]."""
        return None
