import numpy as np
import pytest

from gpaw_export.interface import AtomTensors, CalculationData


class StubCalculation(CalculationData):
    """Deterministic synthetic calculation exposing the adapter interface:
    a handful of normalized plane-wave coefficients per band, a Hermitian
    one-body matrix, and one hydrogen-like augmentation site."""

    def __init__(self, seed=0, mesh=(1, 1, 1), n_bands=1, edge=6.0, n_a=2, converged=True, norm_mismatch=0.0):
        self._rng = np.random.default_rng(seed)
        self._mesh = tuple(mesh)
        self._n_bands = n_bands
        self._edge = edge
        self._n_a = n_a
        self._converged = converged
        self._norm_mismatch = norm_mismatch
        self._n_k = mesh[0] * mesh[1] * mesh[2]

        support = [(0, 0, 0), (1, 0, 0), (-1, 0, 0), (0, 1, 0), (0, -1, 0), (0, 0, 1), (0, 0, -1)]
        self._coeffs = {}
        for kf in range(self._n_k):
            for band in range(n_bands):
                vec = self._rng.standard_normal(len(support)) + 1j * self._rng.standard_normal(len(support))
                vec /= np.linalg.norm(vec)
                self._coeffs[(kf, band)] = dict(zip(support, map(complex, vec)))

        h = self._rng.standard_normal((self._n_k, n_bands, n_bands)) + 1j * self._rng.standard_normal(
            (self._n_k, n_bands, n_bands)
        )
        self._h = 0.5 * (h + np.conj(np.transpose(h, (0, 2, 1))))

        p = self._rng.standard_normal((self._n_k, n_bands, n_a)) + 1j * self._rng.standard_normal(
            (self._n_k, n_bands, n_a)
        )
        self._p = 0.2 * p
        raw = self._rng.standard_normal((n_a,) * 4)
        c = np.empty_like(raw)
        for idx in np.ndindex(raw.shape):
            i, j, k, l = idx
            pair1, pair2 = (min(i, j), max(i, j)), (min(k, l), max(k, l))
            c[idx] = raw[min((pair1 + pair2, pair2 + pair1))]
        self._c = 0.3 * c

    def lattice(self):
        return self._edge * np.eye(3)

    def mesh(self):
        return self._mesh

    def n_bands(self):
        return self._n_bands

    def converged(self):
        return self._converged

    def one_body(self, n_bands):
        return self._h[:, :n_bands, :n_bands]

    def wave_coefficients(self, k_flat, band):
        return self._coeffs[(k_flat, band)]

    def atom_tensors(self, n_bands):
        return [
            AtomTensors(
                species="H",
                projector_overlaps=self._p[:, :n_bands, :],
                c_tensor=self._c,
                partial_wave_norm_mismatch=self._norm_mismatch,
            )
        ]


@pytest.fixture
def stub():
    return StubCalculation(seed=3)
