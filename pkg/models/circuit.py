"""
Circuit layout schemas: elementary element placements and their ordering.
"""

from enum import Enum
from typing import Optional

from pydantic import BaseModel, ConfigDict, Field, model_validator


class ElementKind(str, Enum):
    """Elementary integrated-optics elements."""

    COUPLER = "coupler"
    PHASE_SHIFTER = "phase_shifter"


class ElementPlacement(BaseModel):
    """
    One element placed on an ordered pair of 1-based guide indices.

    Couplers carry ``theta`` (coupling phase, rad), phase shifters carry
    ``phi`` (rad). The first mode of the pair receives the first row of the
    2x2 matrix.
    """

    model_config = ConfigDict(frozen=True)

    kind: ElementKind
    theta: Optional[float] = Field(default=None, allow_inf_nan=False)
    phi: Optional[float] = Field(default=None, allow_inf_nan=False)
    modes: tuple[int, int]

    @model_validator(mode="after")
    def check_parameter(self) -> "ElementPlacement":
        if self.kind is ElementKind.COUPLER and (self.theta is None or self.phi is not None):
            raise ValueError("a coupler takes 'theta' only")
        if self.kind is ElementKind.PHASE_SHIFTER and (self.phi is None or self.theta is not None):
            raise ValueError("a phase shifter takes 'phi' only")
        i, j = self.modes
        if i == j:
            raise ValueError(f"element modes must be distinct, got {self.modes}")
        if min(i, j) < 1:
            raise ValueError(f"modes are 1-based, got {self.modes}")
        return self

    @property
    def parameter(self) -> float:
        return self.theta if self.kind is ElementKind.COUPLER else self.phi

    @classmethod
    def coupler(cls, theta: float, modes: tuple[int, int]) -> "ElementPlacement":
        return cls(kind=ElementKind.COUPLER, theta=theta, modes=modes)

    @classmethod
    def phase_shifter(cls, phi: float, modes: tuple[int, int]) -> "ElementPlacement":
        return cls(kind=ElementKind.PHASE_SHIFTER, phi=phi, modes=modes)


class CircuitLayout(BaseModel):
    """Elements in propagation order over ``dim`` guides."""

    model_config = ConfigDict(frozen=True)

    dim: int = Field(..., ge=1, description="Number of guides N")
    elements: list[ElementPlacement] = Field(default_factory=list)

    @model_validator(mode="after")
    def check_modes_in_range(self) -> "CircuitLayout":
        for index, element in enumerate(self.elements):
            if max(element.modes) > self.dim:
                raise ValueError(
                    f"element {index} uses modes {element.modes} but the circuit has {self.dim} guides"
                )
        return self

    def then(self, other: "CircuitLayout") -> "CircuitLayout":
        """Concatenate ``other`` after this layout."""
        if other.dim != self.dim:
            raise ValueError(f"cannot chain layouts of {self.dim} and {other.dim} guides")
        return CircuitLayout(dim=self.dim, elements=[*self.elements, *other.elements])

    def to_json(self) -> str:
        return self.model_dump_json(exclude_none=True, indent=2)
