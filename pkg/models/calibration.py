"""
Schemas for directional-coupler characterization data and the fitted
calibration laws.
"""

import math
from collections import defaultdict
from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from settings import settings

# Pairs summing to 1 within this many ulp are taken as already normalized
_UNIT_SUM_ULPS = 4


class CouplerMeasurement(BaseModel):
    """Normalized bar (P4) and cross (P3) powers of one characterization element."""

    model_config = ConfigDict(frozen=True)

    d_m: float = Field(..., gt=0, description="Waveguide separation on the mask (um)")
    l_c: float = Field(..., gt=0, description="Mask coupling length (mm)")
    P4: float = Field(..., ge=0, le=1, description="Normalized power at output 4 (bar)")
    P3: float = Field(..., ge=0, le=1, description="Normalized power at output 3 (cross)")

    @model_validator(mode="after")
    def check_power_sum(self) -> "CouplerMeasurement":
        total = self.P4 + self.P3
        if abs(total - 1.0) > settings.power_sum_tol:
            raise ValueError(f"P4 + P3 = {total:.4f} is not within {settings.power_sum_tol} of 1")
        return self

    @classmethod
    def normalized(cls, d_m: float, l_c: float, p4: float, p3: float) -> "CouplerMeasurement":
        """
        Rescale a raw power pair so it sums to 1, with P3 = 1 - P4.

        A pair already summing to 1 within a few ulp keeps its P4, so
        normalizing a normalized record returns it unchanged.
        """
        total = p4 + p3
        if total <= 0:
            raise ValueError("P4 + P3 must be positive")
        if p4 > 1.0 or abs(total - 1.0) > _UNIT_SUM_ULPS * math.ulp(1.0):
            p4 = p4 / total
        return cls(d_m=d_m, l_c=l_c, P4=p4, P3=1.0 - p4)


class MeasurementTable(BaseModel):
    """Characterization records, ordered by (d_m, l_c)."""

    model_config = ConfigDict(frozen=True)

    records: list[CouplerMeasurement]
    metadata: dict[str, str] = Field(default_factory=dict)

    @field_validator("records")
    @classmethod
    def order_series(cls, records: list[CouplerMeasurement]) -> list[CouplerMeasurement]:
        ordered = sorted(records, key=lambda r: (r.d_m, r.l_c))
        for previous, current in zip(ordered, ordered[1:]):
            if previous.d_m == current.d_m and previous.l_c == current.l_c:
                raise ValueError(f"duplicate record at (d_m={current.d_m}, l_c={current.l_c})")
        return ordered

    def series(self) -> dict[float, list[CouplerMeasurement]]:
        grouped: dict[float, list[CouplerMeasurement]] = defaultdict(list)
        for record in self.records:
            grouped[record.d_m].append(record)
        return dict(sorted(grouped.items()))


class SeriesFit(BaseModel):
    """Linear law theta = a_l * l_c + b_l for one waveguide separation."""

    d_m: float
    a_l: float = Field(..., gt=0, description="Slope, equal to kappa (rad/mm)")
    b_l: float = Field(..., description="Intercept, kappa * delta_l_c (rad)")
    delta_l_c: float = Field(..., description="Effective extra coupling length (mm)")
    l_c: list[float]
    phases: list[float] = Field(..., description="Unwrapped coupling phases (rad)")
    fold_assignment: list[int] = Field(..., description="Quadrant index chosen per point")
    residual: float = Field(..., description="RMS residual (rad)")

    @model_validator(mode="after")
    def check_consistency(self) -> "SeriesFit":
        if not math.isfinite(self.residual):
            raise ValueError("residual must be finite")
        if not math.isclose(self.delta_l_c, self.b_l / self.a_l, rel_tol=1e-9, abs_tol=1e-12):
            raise ValueError("delta_l_c must equal b_l / a_l")
        if not len(self.l_c) == len(self.phases) == len(self.fold_assignment):
            raise ValueError("per-point fields must have equal length")
        return self


class LengthProfileFit(BaseModel):
    """Exponential law theta = a_e * exp(-b_e * d_m) at one mask length."""

    l_c: float
    a_e: float
    b_e: float
    residual: float


class Provenance(BaseModel):
    input_digest: Optional[str] = None
    timestamp: Optional[str] = None


# Published exponential law for kappa(d_m)
PUBLISHED_KAPPA0 = 3.065 * math.pi
PUBLISHED_GAMMA = 0.537


class CalibrationModel(BaseModel):
    """kappa(d_m) = kappa0 * exp(-gamma * d_m) plus the fits it came from."""

    series: list[SeriesFit] = Field(default_factory=list)
    kappa0: float = Field(..., gt=0, description="rad/mm")
    gamma: float = Field(..., gt=0, description="1/um")
    fit_residual: float = Field(default=0.0, description="Relative RMS of the kappa fit")
    excluded_series: list[float] = Field(default_factory=list)
    shared_delta_l_c: Optional[float] = None
    length_profiles: list[LengthProfileFit] = Field(default_factory=list)
    provenance: Provenance = Field(default_factory=Provenance)

    @classmethod
    def published(cls) -> "CalibrationModel":
        return cls(kappa0=PUBLISHED_KAPPA0, gamma=PUBLISHED_GAMMA)


class CouplerClass(str, Enum):
    BALANCED = "X_pi/4"
    CROSS = "X_pi/2"


class CouplerClassification(BaseModel):
    d_m: float
    l_c: float
    P4: float
    P3: float
    label: Optional[CouplerClass] = None


class DesignConstraint(str, Enum):
    FIXED_DM = "fixed_dm"
    FIXED_LC = "fixed_lc"


class CouplerDesign(BaseModel):
    """Mask geometry realizing a target coupling phase."""

    target_theta: float
    d_m: float
    l_c: float
    delta_l_c: float
    kappa: float
    constraint: DesignConstraint
    extrapolated: bool = False
