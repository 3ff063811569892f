"""Bloch-orbital PAW toolkit: Hamiltonian assembly, LCU factorization,
one-norm evaluation, fault-tolerant resource estimation, and brute-force
Fock-space verification."""

from .dataset import (
    AtomSite,
    BlochDataset,
    SynthSizes,
    TruncationPolicy,
    apply_truncation,
    load_dataset,
    save_dataset,
    synth_dataset,
)
from .factorize import LcuFactorization, factorize_dataset
from .lattice import CellGeometry, GIndex, KernelKind, KernelSpec, KIndex, MeshDims, mod_add
from .onenorm import NormBreakdown, lambda_total
from .resources import BitParams, QroamParams, ResourceReport, total_resources

__all__ = [
    "AtomSite",
    "BlochDataset",
    "BitParams",
    "CellGeometry",
    "GIndex",
    "KernelKind",
    "KernelSpec",
    "KIndex",
    "LcuFactorization",
    "MeshDims",
    "NormBreakdown",
    "QroamParams",
    "ResourceReport",
    "SynthSizes",
    "TruncationPolicy",
    "apply_truncation",
    "factorize_dataset",
    "lambda_total",
    "load_dataset",
    "mod_add",
    "save_dataset",
    "synth_dataset",
    "total_resources",
]
