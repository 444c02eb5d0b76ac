"""
Schemas for single-photon states, basis labels and detector click records.
"""

from enum import Enum

from pydantic import BaseModel, ConfigDict, Field, model_validator


class MubBasis(str, Enum):
    X = "X"
    Y = "Y"


class MubElement(str, Enum):
    D = "D"
    A = "A"
    L = "L"
    R = "R"


_ELEMENTS_BY_BASIS = {
    MubBasis.X: (MubElement.D, MubElement.A),
    MubBasis.Y: (MubElement.L, MubElement.R),
}


class MubLabel(BaseModel):
    """A state of the X (diagonal/antidiagonal) or Y (circular) basis."""

    model_config = ConfigDict(frozen=True)

    basis: MubBasis
    element: MubElement

    @model_validator(mode="after")
    def check_consistent(self) -> "MubLabel":
        if self.element not in _ELEMENTS_BY_BASIS[self.basis]:
            raise ValueError(f"{self.element.value} is not an element of basis {self.basis.value}")
        return self

    @classmethod
    def of(cls, basis: str, element: str) -> "MubLabel":
        return cls(basis=MubBasis(basis), element=MubElement(element))

    def __str__(self) -> str:
        return f"{self.basis.value}:{self.element.value}"


def all_mub_labels() -> list[MubLabel]:
    return [
        MubLabel(basis=basis, element=element)
        for basis, elements in _ELEMENTS_BY_BASIS.items()
        for element in elements
    ]


class StatePayload(BaseModel):
    """JSON form of a photon state: real and imaginary amplitude parts."""

    dim: int = Field(..., ge=1)
    re: list[float]
    im: list[float]

    @model_validator(mode="after")
    def check_lengths(self) -> "StatePayload":
        if len(self.re) != self.dim or len(self.im) != self.dim:
            raise ValueError(
                f"expected {self.dim} real and imaginary parts, got {len(self.re)} and {len(self.im)}"
            )
        return self


class ClickCounts(BaseModel):
    """Detector clicks per output guide from a seeded multinomial draw."""

    counts: list[int]
    trials: int = Field(..., gt=0)
    seed: int
    rng: str = "PCG64"

    @model_validator(mode="after")
    def check_total(self) -> "ClickCounts":
        if any(c < 0 for c in self.counts):
            raise ValueError("click counts must be non-negative")
        if sum(self.counts) != self.trials:
            raise ValueError(f"counts sum to {sum(self.counts)}, expected {self.trials}")
        return self

    def frequencies(self) -> list[float]:
        return [c / self.trials for c in self.counts]

    def csv_rows(self) -> list[tuple[int, int, int, int]]:
        """Rows of ``output_index,count,trials,seed`` with 1-based outputs."""
        return [(index + 1, count, self.trials, self.seed) for index, count in enumerate(self.counts)]
