"""Assemble and write a schema-version-1 dataset file from a calculation.

The density Fourier coefficients are built by convolving pseudo-wavefunction
plane-wave coefficients,

    C[Q][k][G][i][j] = sum_G' conj(c_{k,i}(G')) c_{k+Q,j}(G' + G + W),

with W the integer wrap of k + Q back into the mesh cell, plus any
compensation-charge coefficients the upstream code provides.  This form
carries the conjugation pairing the downstream validator and verifier rely
on exactly, provided coefficient lookups outside the stored sphere are
treated as zero.
"""

from __future__ import annotations

import argparse
import json
import sys
import warnings
from dataclasses import dataclass

import numpy as np

TWO_PI = 2.0 * np.pi
SCHEMA_VERSION = 1


class ExportError(RuntimeError):
    pass


@dataclass(frozen=True)
class ExportJob:
    calculation: object  # CalculationData
    n_bands: int
    ecut_ha: float
    out_path: str
    mesh: tuple[int, int, int] | None = None  # must match the calculation


def _mesh_points(mesh):
    m1, m2, m3 = mesh
    return [(a, b, c) for a in range(m1) for b in range(m2) for c in range(m3)]


def _flat_add(a, b, mesh):
    coords = tuple((x + y) % m for x, y, m in zip(a, b, mesh))
    wrap = tuple((x + y) // m for x, y, m in zip(a, b, mesh))
    return coords, wrap


def plane_wave_sphere(recip: np.ndarray, ecut_ha: float) -> list[tuple[int, int, int]]:
    """Miller vectors with kinetic energy |G|^2 / 2 <= ecut, ordered by
    (|G|^2, miller); negation-symmetric by construction."""
    gmax = np.sqrt(2.0 * ecut_ha)
    lengths = np.linalg.norm(recip, axis=1)
    reach = max(1, int(np.ceil(gmax / lengths.min())))
    out = []
    for mx in range(-reach, reach + 1):
        for my in range(-reach, reach + 1):
            for mz in range(-reach, reach + 1):
                g = np.array([mx, my, mz]) @ recip
                if 0.5 * float(g @ g) <= ecut_ha + 1e-12:
                    out.append((mx, my, mz))
    out.sort(key=lambda m: (float(np.dot(np.array(m) @ recip, np.array(m) @ recip)), m))
    return out


def _pairing_wraps(mesh) -> set:
    """Distinct wrap vectors [Q_alpha != 0] over the mesh; the conjugate of a
    mode (Q, G) lives at (-Q, -G - wrap(Q))."""
    wraps = set()
    for q in _mesh_points(mesh):
        wraps.add(tuple(1 if c != 0 else 0 for c in q))
    return wraps


def pairing_closed_g_list(recip: np.ndarray, ecut_ha: float, mesh) -> list[tuple[int, int, int]]:
    """Cutoff sphere extended by the conjugate partners every momentum sector
    needs, so no in-sphere density mode is ever dropped for lack of its
    Hermitian counterpart."""
    sphere = plane_wave_sphere(recip, ecut_ha)
    closure = set(sphere)
    for wrap in _pairing_wraps(mesh):
        for g in sphere:
            closure.add((-g[0] - wrap[0], -g[1] - wrap[1], -g[2] - wrap[2]))
    out = list(closure)
    out.sort(key=lambda m: (float(np.dot(np.array(m) @ recip, np.array(m) @ recip)), m))
    return out


def _complex_to_json(arr: np.ndarray):
    return np.stack([np.real(arr), np.imag(arr)], axis=-1).tolist()


def _density_block(coeff_bra, coeff_ket, miller, active, wrap, n_bands):
    """C[G][i][j] for one (Q, k): bra coefficients at k, ket at k+Q.
    Only ``active`` mode indices (those whose conjugate partner is stored)
    are populated, keeping the pairing exact on the truncated list."""
    block = np.zeros((len(miller), n_bands, n_bands), dtype=complex)
    for gi in active:
        g = miller[gi]
        for i in range(n_bands):
            bra = coeff_bra[i]
            for j in range(n_bands):
                ket = coeff_ket[j]
                acc = 0.0 + 0.0j
                for g1, c1 in bra.items():
                    g2 = (g1[0] + g[0] + wrap[0], g1[1] + g[1] + wrap[1], g1[2] + g[2] + wrap[2])
                    c2 = ket.get(g2)
                    if c2 is not None:
                        acc += np.conj(c1) * c2
                block[gi, i, j] = acc
    return block


def export_dataset(job: ExportJob) -> dict:
    """Extract tensors, assemble the dataset document, and write it."""
    calc = job.calculation
    if not calc.converged():
        raise ExportError("calculation is not converged; refusing to export")

    mesh = tuple(calc.mesh())
    if job.mesh is not None and tuple(job.mesh) != mesh:
        raise ExportError(f"requested mesh {job.mesh} does not match the calculation mesh {mesh}")
    available = calc.n_bands()
    if job.n_bands > available:
        raise ExportError(f"requested {job.n_bands} bands but only {available} were computed")
    n_bands = int(job.n_bands)

    lattice = np.asarray(calc.lattice(), dtype=float).reshape(3, 3)
    volume = float(abs(np.linalg.det(lattice)))
    recip = TWO_PI * np.linalg.inv(lattice.T)
    millers = pairing_closed_g_list(recip, job.ecut_ha, mesh)

    points = _mesh_points(mesh)
    n_k = len(points)
    flat = {p: idx for idx, p in enumerate(points)}

    h = np.asarray(calc.one_body(n_bands), dtype=complex)
    if h.shape != (n_k, n_bands, n_bands):
        raise ExportError(f"one_body returned shape {h.shape}, expected {(n_k, n_bands, n_bands)}")
    for k in range(n_k):
        if np.max(np.abs(h[k] - h[k].conj().T)) > 1e-10 * max(1.0, np.max(np.abs(h[k]))):
            raise ExportError(f"one-body matrix at k={k} is not Hermitian")

    coeffs = [[calc.wave_coefficients(kf, band) for band in range(n_bands)] for kf in range(n_k)]

    lookup = {m: gi for gi, m in enumerate(millers)}
    density = np.zeros((n_k, n_k, len(millers), n_bands, n_bands), dtype=complex)
    for q in points:
        qf = flat[q]
        q_wrap = tuple(1 if c != 0 else 0 for c in q)
        active = [
            gi
            for gi, g in enumerate(millers)
            if (-g[0] - q_wrap[0], -g[1] - q_wrap[1], -g[2] - q_wrap[2]) in lookup
        ]
        for k in points:
            kf = flat[k]
            kq, wrap = _flat_add(k, q, mesh)
            density[qf, kf] = _density_block(coeffs[kf], coeffs[flat[kq]], millers, active, wrap, n_bands)
            comp = calc.compensation_coefficients(qf, kf)
            if comp:
                for miller, blk in comp.items():
                    gi = lookup.get(tuple(miller))
                    if gi is not None:
                        density[qf, kf, gi] += np.asarray(blk, dtype=complex)

    atoms_doc = []
    for site in calc.atom_tensors(n_bands):
        p = np.asarray(site.projector_overlaps, dtype=complex)
        n_a = p.shape[-1]
        if p.shape != (n_k, n_bands, n_a):
            raise ExportError(f"projector overlaps for {site.species} have shape {p.shape}")
        c = np.asarray(site.c_tensor, dtype=float)
        for perm in [(1, 0, 2, 3), (0, 1, 3, 2), (2, 3, 0, 1)]:
            if np.max(np.abs(c - c.transpose(perm))) > 1e-10 * max(1.0, np.max(np.abs(c))):
                raise ExportError(f"on-site tensor for {site.species} lacks pair symmetry")
        if site.partial_wave_norm_mismatch > 1e-8:
            warnings.warn(
                f"partial waves for {site.species} are not norm-matched "
                f"(mismatch {site.partial_wave_norm_mismatch:.2e}); the overlap "
                "operator may deviate from the identity",
                stacklevel=2,
            )
        atoms_doc.append(
            {
                "species": site.species,
                "n_a": int(n_a),
                "projector_overlaps": _complex_to_json(p),
                "c_tensor": c.tolist(),
            }
        )

    doc = {
        "schema_version": SCHEMA_VERSION,
        "geometry": {"lattice": [float(x) for x in lattice.ravel()], "volume": volume},
        "mesh": list(mesh),
        "n_b": n_bands,
        "g_list": [list(m) for m in millers],
        "atoms": atoms_doc,
        "h_one_body": _complex_to_json(h),
        "density_fourier": _complex_to_json(density),
    }
    table = calc.kernel_table(millers, recip)
    if table is not None:
        table = np.asarray(table, dtype=float)
        if table.shape != (len(millers), n_k):
            raise ExportError(f"kernel table has shape {table.shape}, expected {(len(millers), n_k)}")
        doc["kernel_table"] = table.tolist()

    with open(job.out_path, "w") as fh:
        json.dump(doc, fh, separators=(",", ":"))
        fh.write("\n")
    return doc


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description="Export a GPAW calculation to a dataset file.")
    parser.add_argument("--restart", required=True, help="GPAW restart (.gpw) file")
    parser.add_argument("--bands", type=int, required=True)
    parser.add_argument("--ecut-ev", type=float, default=500.0, help="plane-wave cutoff for the density modes")
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)

    from .gpaw_adapter import GpawCalculation

    ev_to_ha = 1.0 / 27.211386245988
    job = ExportJob(
        calculation=GpawCalculation(args.restart),
        n_bands=args.bands,
        ecut_ha=args.ecut_ev * ev_to_ha,
        out_path=args.out,
    )
    try:
        export_dataset(job)
    except ExportError as exc:
        print(f"export failed: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
