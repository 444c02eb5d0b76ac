"""
Schemas for the grating-driven projection test of a single coupler.
"""

from enum import Enum

from pydantic import BaseModel, Field

from models.states import ClickCounts
from settings import settings


class OutputLabeling(str, Enum):
    """
    Which physical output is called "output 1".

    ``turned_around`` (default) puts the + branch of the sweep law on
    output 1; ``direct`` puts the - branch there.
    """

    TURNED_AROUND = "turned_around"
    DIRECT = "direct"


class GratingConfig(BaseModel):
    """Diffraction grating producing the two input beams."""

    period: float = Field(
        default_factory=lambda: settings.grating_period_um,
        gt=0,
        description="Grating period in micrometers; the relative phase advances 2*pi per half period",
    )


class SweepRecord(BaseModel):
    displacement: float = Field(..., description="Grating displacement (um)")
    epsilon: float = Field(..., description="Relative phase between the beams (rad)")
    P1: float = Field(..., ge=0, le=1)
    P2: float = Field(..., ge=0, le=1)


class SweepFit(BaseModel):
    """Fringe fit P1(eps) = background + visibility * (1 + sin(eps + offset)) / 2."""

    theta_est: float = Field(..., description="Coupling phase folded into [0, pi/4]")
    theta_alternate: float = Field(..., description="pi/2 - theta_est, indistinguishable from one sweep")
    visibility: float = Field(..., ge=0, le=1)
    epsilon_offset: float
    background: float = Field(..., description="Fringe floor of P1")
    excess_background: float = Field(..., description="Floor above the ideal (1 - visibility) / 2")
    residual: float = Field(..., description="RMS residual of P1")
    records: int


class DisplacementClicks(BaseModel):
    """Simulated detections at one grating position."""

    displacement: float
    epsilon: float
    probabilities: tuple[float, float]
    clicks: ClickCounts
