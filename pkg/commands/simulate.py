"""
`simulate`: detection probabilities and sampled clicks for a circuit.
"""

import logging
from typing import Optional

from pydantic import Field

from commands.common import GlobalOptions, OutputFormat, command_span, emit
from models.circuit import CircuitLayout
from models.errors import InvalidArgumentError
from models.states import MubBasis
from services.circuits import projector_circuit, reference_matrices, splitter_circuit, two_mode_projector
from services.io import build_manifest, load_layout, parse_state_spec, render_csv, render_json
from services.states import RNG_ALGORITHM, detection_probabilities, sample_clicks
from services.unitary import compose


logger = logging.getLogger(__name__)

BUILTIN_CIRCUITS = {
    "splitter": splitter_circuit,
    "projector": projector_circuit,
    "px": lambda: two_mode_projector(MubBasis.X),
    "py": lambda: two_mode_projector(MubBasis.Y),
}


def resolve_circuit(name: str) -> tuple[CircuitLayout, list[str]]:
    """Builtin layout by name, else a layout JSON file; returns the input files read."""
    builder = BUILTIN_CIRCUITS.get(name.strip().lower())
    if builder is not None:
        return builder(), []
    return load_layout(name), [name]


class SimulateCommand(GlobalOptions):
    """Propagate a photon state through a circuit."""

    circuit: str = Field(
        default="projector",
        description="splitter, projector, px, py or a circuit layout JSON file",
    )
    state: Optional[str] = Field(default=None, description="mode:<j>, <X|Y>:<D|A|L|R>@(j,k) or a state JSON file")
    trials: Optional[int] = Field(default=None, gt=0, description="Sample this many detections")
    export_reference: bool = Field(default=False, description="Write the literal splitter and projector matrices")

    def cli_cmd(self) -> None:
        with command_span("simulate", circuit=self.circuit, trials=self.trials, seed=self.seed):
            if self.export_reference:
                manifest = build_manifest("simulate")
                emit(render_json(reference_matrices().to_payload().model_dump(), manifest), self.output)
                return
            if self.state is None:
                raise InvalidArgumentError("--state is required unless --export-reference is given")

            layout, inputs = resolve_circuit(self.circuit)
            state = parse_state_spec(self.state, layout.dim)
            if state.dim != layout.dim:
                raise InvalidArgumentError(f"{state.dim}-guide state for a {layout.dim}-guide circuit")
            probabilities = detection_probabilities(state, compose(layout))
            clicks = sample_clicks(probabilities, self.trials, self.seed) if self.trials else None
            manifest = build_manifest(
                "simulate",
                inputs=inputs,
                seed=self.seed if clicks else None,
                rng=RNG_ALGORITHM if clicks else None,
            )

            if self.resolved_format(OutputFormat.JSON) is OutputFormat.CSV:
                if clicks:
                    text = render_csv(("output_index", "count", "trials", "seed"), clicks.csv_rows(), manifest)
                else:
                    rows = [(index + 1, float(p)) for index, p in enumerate(probabilities)]
                    text = render_csv(("output_index", "probability"), rows, manifest)
            else:
                payload = {
                    "circuit": self.circuit,
                    "dim": layout.dim,
                    "state": state.to_payload().model_dump(),
                    "probabilities": [float(p) for p in probabilities],
                }
                if clicks:
                    payload["clicks"] = clicks.model_dump()
                    payload["frequencies"] = clicks.frequencies()
                text = render_json(payload, manifest)
            emit(text, self.output)
