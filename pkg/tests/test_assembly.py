import numpy as np
import pytest

from blochpaw.assembly import assemble_d, h_tilde, kappa_full, kappa_hard, kappa_soft
from blochpaw.dataset import SynthSizes, TruncationPolicy, synth_dataset, apply_truncation
from blochpaw.lattice import KernelKind, KernelSpec, flat_add, kernel_weights

from conftest import manual_dataset


def naive_kappa_soft(ds, q_flat, kernel):
    """Triple-loop reference: independent of the einsum implementation."""
    n_k, n_b, n_pw = ds.n_k, ds.n_b, ds.n_pw
    w = kernel_weights(ds, kernel)
    out = np.zeros((n_k, n_k, n_b, n_b, n_b, n_b), dtype=complex)
    for k in range(n_k):
        for kp in range(n_k):
            for i in range(n_b):
                for j in range(n_b):
                    for m in range(n_b):
                        for l in range(n_b):
                            acc = 0.0 + 0.0j
                            for g in range(n_pw):
                                acc += (
                                    w[g, q_flat]
                                    * np.conj(ds.density_fourier[q_flat, k, g, i, j])
                                    * ds.density_fourier[q_flat, kp, g, m, l]
                                )
                            out[k, kp, i, j, m, l] = acc
    return out


def naive_kappa_hard(ds, q_flat):
    """Five-loop reference over atoms and partial-wave quadruples."""
    n_k, n_b = ds.n_k, ds.n_b
    out = np.zeros((n_k, n_k, n_b, n_b, n_b, n_b), dtype=complex)
    for a, site in enumerate(ds.atoms):
        n_a = site.n_a
        p = site.projector_overlaps
        c = site.c_tensor
        for k in range(n_k):
            kq = flat_add(k, q_flat, ds.mesh)
            for kp in range(n_k):
                kpq = flat_add(kp, q_flat, ds.mesh)
                for i in range(n_b):
                    for j in range(n_b):
                        for m in range(n_b):
                            for l in range(n_b):
                                acc = 0.0 + 0.0j
                                for p1 in range(n_a):
                                    for p2 in range(n_a):
                                        d_bra = np.conj(np.conj(p[k, i, p1]) * p[kq, j, p2])
                                        for p3 in range(n_a):
                                            for p4 in range(n_a):
                                                d_ket = np.conj(p[kp, m, p3]) * p[kpq, l, p4]
                                                acc += d_bra * c[p1, p2, p3, p4] * d_ket
                                out[k, kp, i, j, m, l] += acc
    return out


def test_assemble_d_unit_vectors():
    p = np.zeros((1, 2, 2), dtype=complex)
    p[0, 0] = [1.0, 0.0]
    p[0, 1] = [0.0, 1.0]
    c = np.zeros((2, 2, 2, 2))
    ds = manual_dataset(n_b=2, atoms=[(p, c)])
    block = assemble_d(ds, 0, 0, 0, 0, 1)
    assert np.array_equal(block.values, np.array([[0, 1], [0, 0]], dtype=complex))


def test_assemble_d_self_pair_hermitian(rng):
    p = (rng.standard_normal((1, 1, 3)) + 1j * rng.standard_normal((1, 1, 3))).astype(complex)
    ds = manual_dataset(n_b=1, atoms=[(p, np.zeros((3, 3, 3, 3)))])
    block = assemble_d(ds, 0, 0, 0, 0, 0).values
    assert np.allclose(block, block.conj().T)


def test_assemble_d_total_truncation(rng):
    p = (rng.standard_normal((1, 2, 2)) + 1j * rng.standard_normal((1, 2, 2))).astype(complex)
    ds = manual_dataset(n_b=2, atoms=[(p, np.zeros((2, 2, 2, 2)))])
    ds = apply_truncation(ds, TruncationPolicy(d_tensor_threshold=np.inf))
    assert np.all(assemble_d(ds, 0, 0, 0, 0, 1).values == 0.0)


def test_assemble_d_rank_one_identity(rng):
    p = (rng.standard_normal((1, 2, 3)) + 1j * rng.standard_normal((1, 2, 3))).astype(complex)
    ds = manual_dataset(n_b=2, atoms=[(p, np.zeros((3, 3, 3, 3)))])
    d = assemble_d(ds, 0, 0, 0, 0, 1).values
    for p1 in range(3):
        for p2 in range(3):
            for q1 in range(3):
                for q2 in range(3):
                    assert d[p1, p2] * d[q1, q2] == pytest.approx(d[p1, q2] * d[q1, p2])


def test_kappa_soft_zero_density():
    ds = manual_dataset(n_b=2, g_millers=((0, 0, 0), (1, 0, 0)))
    sector = kappa_soft(ds, 0, KernelSpec())
    assert np.all(sector.values == 0.0)


def test_kappa_soft_single_mode_unity():
    # C = 1, v' = 1 (tabulated), 4 pi / V = 1 by the manual cell edge
    density = np.ones((1, 1, 1, 1, 1), dtype=complex)
    ds = manual_dataset(n_b=1, density=density, kernel_table=[[1.0]])
    sector = kappa_soft(ds, 0, ds.kernel(KernelKind.TABULATED))
    assert sector.values.ravel()[0] == pytest.approx(1.0, abs=1e-14)


@pytest.mark.parametrize("seed", [0, 1])
def test_kappa_soft_matches_naive(seed):
    ds = synth_dataset(seed, SynthSizes((2, 1, 1), 2, 1, 1, 4), "flat")
    kern = KernelSpec()
    for qf in range(ds.n_k):
        fast = kappa_soft(ds, qf, kern).values
        slow = naive_kappa_soft(ds, qf, kern)
        assert np.max(np.abs(fast - slow)) < 1e-12 * max(1.0, np.max(np.abs(slow)))


def test_kappa_hard_zero_c():
    p = np.ones((1, 2, 2), dtype=complex)
    ds = manual_dataset(n_b=2, atoms=[(p, np.zeros((2, 2, 2, 2)))])
    assert np.all(kappa_hard(ds, 0).values == 0.0)


def test_kappa_hard_single_wave_hand_expansion(rng):
    # n_a = 1, real P: kappa = c * (P products) by direct expansion
    p = rng.standard_normal((1, 2, 1)).astype(complex)
    c = np.full((1, 1, 1, 1), 0.7)
    ds = manual_dataset(n_b=2, atoms=[(p, c)])
    got = kappa_hard(ds, 0).values
    pr = p[0, :, 0].real
    for i in range(2):
        for j in range(2):
            for m in range(2):
                for l in range(2):
                    expect = 0.7 * pr[i] * pr[j] * pr[m] * pr[l]
                    assert got[0, 0, i, j, m, l] == pytest.approx(expect, abs=1e-13)


@pytest.mark.parametrize("seed", [2, 3])
def test_kappa_hard_matches_naive(seed):
    ds = synth_dataset(seed, SynthSizes((2, 1, 1), 2, 2, 2, 1), "flat")
    for qf in range(ds.n_k):
        fast = kappa_hard(ds, qf).values
        slow = naive_kappa_hard(ds, qf)
        assert np.max(np.abs(fast - slow)) < 1e-12 * max(1.0, np.max(np.abs(slow)))


@pytest.mark.parametrize("seed", [4, 5])
def test_sector_hermiticity_as_pair_map(seed):
    """kappa_Q reshaped over (row pair, column pair) is Hermitian."""
    ds = synth_dataset(seed, SynthSizes((2, 1, 1), 2, 1, 2, 4), "flat")
    kern = KernelSpec()
    n = ds.n_k * ds.n_b * ds.n_b
    for qf in range(ds.n_k):
        v = kappa_full(ds, qf, kern).values
        mat = v.transpose(0, 2, 3, 1, 4, 5).reshape(n, n)
        assert np.max(np.abs(mat - mat.conj().T)) < 1e-12 * max(1.0, np.max(np.abs(mat)))


def test_h_tilde_equals_h_when_no_two_body():
    h = np.array([[[0.3 + 0j, 0.1 + 0.2j], [0.1 - 0.2j, -0.4 + 0j]]])
    ds = manual_dataset(n_b=2, h=h)
    assert np.allclose(h_tilde(ds, KernelSpec()), h)


def test_h_tilde_scalar_closed_form():
    """N_k = N_b = 1: h~ = h - kappa/2 + kappa = h + kappa/2."""
    density = np.full((1, 1, 1, 1, 1), 0.8 + 0.0j)
    h = np.full((1, 1, 1), -0.25 + 0j)
    ds = manual_dataset(n_b=1, density=density, kernel_table=[[1.0]])
    ds = manual_dataset(n_b=1, density=density, h=h, kernel_table=[[1.0]])
    kern = ds.kernel(KernelKind.TABULATED)
    kappa = kappa_soft(ds, 0, kern).values.ravel()[0].real
    assert kappa == pytest.approx(0.64, abs=1e-14)
    got = h_tilde(ds, kern).ravel()[0]
    assert got == pytest.approx(-0.25 + 0.5 * kappa, abs=1e-14)


@pytest.mark.parametrize("seed", [6, 7, 8])
def test_h_tilde_hermitian(seed):
    ds = synth_dataset(seed, SynthSizes((2, 2, 1), 2, 1, 2, 5), "physical")
    ht = h_tilde(ds, KernelSpec())
    for k in range(ds.n_k):
        assert np.max(np.abs(ht[k] - ht[k].conj().T)) < 1e-10


def test_h_tilde_matches_sector_contractions():
    """The efficient exchange/direct contractions agree with sums assembled
    from full kappa sectors."""
    ds = synth_dataset(9, SynthSizes((2, 1, 1), 2, 1, 2, 4), "flat")
    kern = KernelSpec()
    sectors = {qf: kappa_full(ds, qf, kern).values for qf in range(ds.n_k)}
    n_k, n_b = ds.n_k, ds.n_b
    expect = np.array(ds.h_one_body, dtype=complex)
    for k in range(n_k):
        exch = np.zeros((n_b, n_b), dtype=complex)
        for qf in range(n_k):
            km = [kp for kp in range(n_k) if flat_add(kp, qf, ds.mesh) == k][0]
            v = sectors[qf]
            for i in range(n_b):
                for j in range(n_b):
                    exch[i, j] += sum(v[km, km, l, i, l, j] for l in range(n_b))
        direct = np.zeros((n_b, n_b), dtype=complex)
        v0 = sectors[0]
        for i in range(n_b):
            for j in range(n_b):
                direct[i, j] += sum(v0[k, kp, j, i, l, l] for kp in range(n_k) for l in range(n_b))
        expect[k] += -0.5 * exch + direct
    got = h_tilde(ds, kern)
    assert np.max(np.abs(got - expect)) < 1e-11 * max(1.0, np.max(np.abs(expect)))


def test_kappa_hard_psd_for_psd_c_tensor(rng):
    """A PSD on-site tensor gives a positive semidefinite hard sector as a
    pair map (all density-mode weights +1), mirroring the squared-mode form."""
    n_a = 2
    pairs = [(p, q) for p in range(n_a) for q in range(p, n_a)]
    m = rng.standard_normal((len(pairs), len(pairs)))
    m = m @ m.T  # PSD pair matrix
    c = np.zeros((n_a,) * 4)
    for mu, (p1, p2) in enumerate(pairs):
        for nu, (p3, p4) in enumerate(pairs):
            val = m[mu, nu] / ((0.5 if p1 == p2 else 1.0) * (0.5 if p3 == p4 else 1.0))
            for a, b in {(p1, p2), (p2, p1)}:
                for cc, d in {(p3, p4), (p4, p3)}:
                    c[a, b, cc, d] = val
    p = (rng.standard_normal((1, 2, n_a)) + 1j * rng.standard_normal((1, 2, n_a))).astype(complex)
    ds = manual_dataset(n_b=2, atoms=[(p, c)])

    v = kappa_hard(ds, 0).values
    n = ds.n_k * ds.n_b * ds.n_b
    mat = v.transpose(0, 2, 3, 1, 4, 5).reshape(n, n)
    assert np.min(np.linalg.eigvalsh(mat)) > -1e-10

    from blochpaw.factorize import build_hard_blocks, factor_c_tensor
    from blochpaw.dataset import TruncationPolicy

    blocks = build_hard_blocks(ds, [factor_c_tensor(ds.atoms[0])], TruncationPolicy.zero())
    assert blocks and all(b.weight == 1.0 for b in blocks.values())
