"""
Schemas for projector outcome interpretation and QKD measurement records.
"""

from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator

from models.states import MubBasis, MubLabel


class OutcomeMapping(str, Enum):
    """Which reading of the projector outputs to use."""

    MATRIX = "matrix"  # derived from the transfer matrix, executable default
    PROSE = "prose"  # as narrated alongside the matrix; disagrees on every output


class OutcomeInterpretation(BaseModel):
    """Output guide (1-based) -> projected basis state."""

    model_config = ConfigDict(frozen=True)

    mapping: OutcomeMapping
    outcomes: dict[int, MubLabel]

    @model_validator(mode="after")
    def check_blocks(self) -> "OutcomeInterpretation":
        if sorted(self.outcomes) != [1, 2, 3, 4]:
            raise ValueError(f"expected outputs 1..4, got {sorted(self.outcomes)}")
        if len(set(self.outcomes.values())) != 4:
            raise ValueError("each basis state must be assigned to exactly one output")
        for output, label in self.outcomes.items():
            expected = MubBasis.X if output in (1, 2) else MubBasis.Y
            if label.basis is not expected:
                raise ValueError(f"output {output} must carry basis {expected.value}")
        return self


class MatrixPayload(BaseModel):
    re: list[list[float]]
    im: list[list[float]]


class ReferenceMatricesPayload(BaseModel):
    """Literal splitter and projector matrices for external verification."""

    S: MatrixPayload
    P: MatrixPayload


class QkdOutcome(BaseModel):
    """One projective detection and its basis interpretation."""

    trial: int = Field(..., ge=0)
    output: int = Field(..., ge=1, le=4)
    basis: MubBasis
    label: MubLabel
    seed: int
    off_protocol_input: bool = Field(
        default=False,
        description="Input had amplitude outside guides 1 and 3",
    )

    def csv_row(self) -> tuple:
        return (self.trial, self.output, self.basis.value, self.label.element.value, self.seed)
