"""Export Bloch-orbital PAW tensors from an electronic-structure
calculation into the blochpaw dataset file format."""

from .exporter import ExportError, ExportJob, export_dataset, plane_wave_sphere
from .interface import AtomTensors, CalculationData

__all__ = [
    "AtomTensors",
    "CalculationData",
    "ExportError",
    "ExportJob",
    "export_dataset",
    "plane_wave_sphere",
]
