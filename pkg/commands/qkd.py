"""
`qkd-sim`: repeated random-basis projective measurement of a state.
"""

import logging
from collections import Counter

from pydantic import Field

from commands.common import GlobalOptions, OutputFormat, command_span, emit
from models.projector import OutcomeMapping
from services.circuits import qkd_measure_batch
from services.io import build_manifest, parse_state_spec, render_csv, render_json
from services.states import RNG_ALGORITHM


logger = logging.getLogger(__name__)

OUTCOME_COLUMNS = ("trial", "output", "basis", "label", "seed")


class QkdSimCommand(GlobalOptions):
    """Measure a four-guide state with the random-basis projector."""

    state: str = Field(description="mode:<j>, <X|Y>:<D|A|L|R>@(j,k) or a state JSON file")
    trials: int = Field(default=1, gt=0, description="Number of single-photon detections")
    mapping: OutcomeMapping = Field(default=OutcomeMapping.MATRIX, description="matrix or prose output labels")

    def cli_cmd(self) -> None:
        with command_span("qkd-sim", trials=self.trials, seed=self.seed) as span:
            state = parse_state_spec(self.state, 4)
            outcomes = qkd_measure_batch(state, self.trials, self.seed, self.mapping)
            manifest = build_manifest("qkd-sim", seed=self.seed, rng=RNG_ALGORITHM)
            bases = Counter(o.basis.value for o in outcomes)
            span.set_attribute("basis_x", bases.get("X", 0))

            if self.resolved_format(OutputFormat.CSV) is OutputFormat.CSV:
                text = render_csv(OUTCOME_COLUMNS, [o.csv_row() for o in outcomes], manifest)
            else:
                payload = {
                    "outcomes": [o.model_dump(mode="json") for o in outcomes],
                    "basis_frequencies": {b: bases.get(b, 0) / self.trials for b in ("X", "Y")},
                    "off_protocol_input": bool(outcomes and outcomes[0].off_protocol_input),
                }
                text = render_json(payload, manifest)
            emit(text, self.output)
            logger.info(
                f"Measured {self.trials} photons: X={bases.get('X', 0)}, Y={bases.get('Y', 0)}",
                extra={"seed": self.seed},
            )
