import numpy as np
import pytest

from blochpaw.dataset import AtomSite, BlochDataset
from blochpaw.lattice import CellGeometry, GIndex, MeshDims


def manual_dataset(
    mesh=(1, 1, 1),
    n_b=1,
    g_millers=((0, 0, 0),),
    h=None,
    density=None,
    atoms=(),
    edge=None,
    kernel_table=None,
):
    """Hand-built dataset for closed-form checks.  ``density`` is the full
    [N_k][N_k][N_pw][N_b][N_b] array; ``atoms`` a list of (P, C) pairs.
    ``edge=(4*pi)**(1/3)`` makes the 4*pi/V Coulomb prefactor equal 1."""
    mesh = MeshDims(tuple(mesh))
    n_k = mesh.n_k
    if edge is None:
        edge = (4.0 * np.pi) ** (1.0 / 3.0)
    geometry = CellGeometry(edge * np.eye(3))
    g_list = tuple(GIndex.from_miller(m, geometry) for m in g_millers)
    n_pw = len(g_list)
    if h is None:
        h = np.zeros((n_k, n_b, n_b), dtype=complex)
    if density is None:
        density = np.zeros((n_k, n_k, n_pw, n_b, n_b), dtype=complex)
    sites = tuple(
        AtomSite(species=f"X{i}", n_a=p.shape[-1], projector_overlaps=p, c_tensor=c)
        for i, (p, c) in enumerate(atoms)
    )
    return BlochDataset(
        geometry=geometry,
        mesh=mesh,
        n_b=n_b,
        g_list=g_list,
        atoms=sites,
        h_one_body=np.asarray(h, dtype=complex),
        density_fourier=np.asarray(density, dtype=complex),
        kernel_table=None if kernel_table is None else np.asarray(kernel_table, dtype=float),
    )


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
