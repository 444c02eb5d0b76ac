"""
Pydantic models for file formats, fitted results and errors.
"""

from .calibration import CalibrationModel, CouplerMeasurement, MeasurementTable, SeriesFit
from .circuit import CircuitLayout, ElementKind, ElementPlacement
from .errors import IqopError
from .manifest import RunManifest
from .semiclassical import OutputLabeling, SweepFit, SweepRecord
from .states import ClickCounts, MubBasis, MubLabel

__all__ = [
    "CalibrationModel",
    "CouplerMeasurement",
    "MeasurementTable",
    "SeriesFit",
    "CircuitLayout",
    "ElementKind",
    "ElementPlacement",
    "IqopError",
    "RunManifest",
    "OutputLabeling",
    "SweepFit",
    "SweepRecord",
    "ClickCounts",
    "MubBasis",
    "MubLabel",
]
