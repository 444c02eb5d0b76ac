"""
Service layer for the toolkit.
"""

from .calibration import CalibrationService, get_calibration_service
from .semiclassical import SweepService, get_sweep_service

__all__ = [
    "CalibrationService",
    "get_calibration_service",
    "SweepService",
    "get_sweep_service",
]
