"""
Run provenance embedded in every machine-readable output.
"""

from typing import Optional

from pydantic import BaseModel, Field


class RunManifest(BaseModel):
    """Command, inputs and randomness that produced an output."""

    command: str
    input_digests: dict[str, str] = Field(default_factory=dict, description="Input file -> sha256 hex digest")
    seed: Optional[int] = None
    rng: Optional[str] = Field(default=None, description="Bit generator used for sampling")
    version: str
    timestamp: str
