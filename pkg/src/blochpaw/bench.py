"""Scaling benchmarks: synthetic dataset families along the N_b, N_k, N_a
axes, the lambda/resource pipeline over each family, and log-log power-law
fits of the resulting cost metrics."""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .dataset import MEV_IN_HARTREE, SynthSizes, TruncationPolicy, synth_dataset
from .factorize import factorize_dataset
from .lattice import KernelSpec
from .onenorm import lambda_total
from .resources import BitParams, total_resources

AXES = ("Nb", "Nk", "Na")

METRICS = ("lambda2", "toffoli_per_query", "qubits")


@dataclass(frozen=True)
class BenchConfig:
    """Fixed sizes for the non-swept axes.  On the Na axis ``n_b`` and
    ``n_pw`` are interpreted per atom so the per-atom resolution stays
    constant while the supercell grows."""

    mesh: tuple[int, int, int] = (1, 1, 1)
    n_b: int = 6
    n_atoms: int = 1
    n_waves: int = 2
    n_pw: int = 32
    bits: BitParams = field(default_factory=lambda: BitParams(n1=16, n2=16))
    epsilon_qpe: float = MEV_IN_HARTREE
    policy: TruncationPolicy = field(default_factory=TruncationPolicy.zero)


@dataclass(frozen=True)
class SeriesPoint:
    size: int
    lambda2: float
    toffoli_per_query: int
    qubits: int


@dataclass(frozen=True)
class ScalingSeries:
    axis: str
    points: tuple[SeriesPoint, ...]
    fits: dict  # metric -> {"exponent", "intercept", "r_squared"}
    config: dict = field(default_factory=dict)

    def csv_rows(self):
        yield ["size", "lambda2", "toffoli_per_query", "qubits"]
        for p in self.points:
            yield [p.size, p.lambda2, p.toffoli_per_query, p.qubits]

    def to_json_dict(self) -> dict:
        return {
            "axis": self.axis,
            "config": self.config,
            "points": [
                {"size": p.size, "lambda2": p.lambda2, "toffoli_per_query": p.toffoli_per_query, "qubits": p.qubits}
                for p in self.points
            ],
            "fits": self.fits,
        }


def fit_power_law(points) -> tuple[float, float, float]:
    """Ordinary least squares on (log x, log y): (exponent, intercept, r^2)."""
    points = list(points)
    if len(points) < 3:
        raise ValueError("need at least 3 points for a power-law fit")
    if any(x <= 0 or y <= 0 for x, y in points):
        raise ValueError("power-law fit requires positive values")
    lx = np.log([x for x, _ in points])
    ly = np.log([y for _, y in points])
    slope, intercept = np.polyfit(lx, ly, 1)
    pred = slope * lx + intercept
    ss_res = float(np.sum((ly - pred) ** 2))
    ss_tot = float(np.sum((ly - np.mean(ly)) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - ss_res / ss_tot
    return float(slope), float(intercept), r2


def _mesh_for_nk(n_k: int) -> tuple[int, int, int]:
    c = round(n_k ** (1.0 / 3.0))
    if c**3 == n_k:
        return (c, c, c)
    return (n_k, 1, 1)


def sizes_for_point(axis: str, size: int, base: BenchConfig) -> SynthSizes:
    if axis == "Nb":
        return SynthSizes(base.mesh, size, base.n_atoms, base.n_waves, base.n_pw)
    if axis == "Nk":
        return SynthSizes(_mesh_for_nk(size), base.n_b, base.n_atoms, base.n_waves, base.n_pw)
    if axis == "Na":
        return SynthSizes((1, 1, 1), base.n_b * size, size, base.n_waves, base.n_pw * size)
    raise ValueError(f"unknown axis {axis!r}; expected one of {AXES}")


def run_series(axis: str, sizes, base: BenchConfig, seed: int) -> ScalingSeries:
    """Generate a physical-profile family along one axis and fit the cost
    metrics.  Deterministic for a fixed seed."""
    sizes = sorted(int(s) for s in sizes)
    if len(sizes) < 3:
        raise ValueError("need at least 3 sizes for a scaling series")
    if len(set(sizes)) != len(sizes):
        raise ValueError("sizes must be strictly increasing")

    points = []
    for size in sizes:
        ds = synth_dataset(seed, sizes_for_point(axis, size, base), profile="physical")
        fact = factorize_dataset(ds, KernelSpec(), policy=base.policy, keep_rotations=False)
        breakdown = lambda_total(fact, ds)
        report = total_resources(ds, fact, base.bits, base.epsilon_qpe, breakdown)
        points.append(
            SeriesPoint(
                size=size,
                lambda2=breakdown.lambda_two_body,
                toffoli_per_query=report.toffoli_per_step,
                qubits=report.qubits_total,
            )
        )

    fits = {}
    for metric in METRICS:
        exponent, intercept, r2 = fit_power_law([(p.size, float(getattr(p, metric))) for p in points])
        fits[metric] = {"exponent": exponent, "intercept": intercept, "r_squared": r2}
    config = {
        "seed": int(seed),
        "sizes": sizes,
        "mesh": list(base.mesh),
        "n_b": base.n_b,
        "n_atoms": base.n_atoms,
        "n_waves": base.n_waves,
        "n_pw": base.n_pw,
        "epsilon_qpe_ha": base.epsilon_qpe,
        "bits": {
            "b_r": base.bits.b_r,
            "n1": base.bits.n1,
            "n2": base.bits.n2,
            "angle_bits": base.bits.angle_bits,
            "include_sign_qubit": base.bits.include_sign_qubit,
        },
        "thresholds": {
            "density": base.policy.density_threshold,
            "d_tensor": base.policy.d_tensor_threshold,
            "c_tensor": base.policy.c_tensor_threshold,
            "eigenvalue": base.policy.eigenvalue_threshold,
        },
    }
    return ScalingSeries(axis=axis, points=tuple(points), fits=fits, config=config)


def write_series(series: ScalingSeries, csv_path, fit_path) -> None:
    with open(csv_path, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in series.csv_rows():
            writer.writerow(row)
    with open(fit_path, "w") as fh:
        json.dump(series.to_json_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")
