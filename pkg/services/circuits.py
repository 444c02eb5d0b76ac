"""
Canonical projector circuits: the state splitter, the random-basis
projector, the two-guide X/Y projectors and the interpretation of
projector outputs for BB84-style measurement.
"""

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from models.circuit import CircuitLayout, ElementPlacement
from models.errors import ConsistencyError, InvalidArgumentError
from models.projector import (
    MatrixPayload,
    OutcomeInterpretation,
    OutcomeMapping,
    QkdOutcome,
    ReferenceMatricesPayload,
)
from models.states import MubBasis, MubLabel, all_mub_labels
from services.states import PhotonState, detection_probabilities, mub_state, sample_outcomes
from services.unitary import ModeUnitary, compose, equal_up_to_global_phase


logger = logging.getLogger(__name__)

QUARTER = math.pi / 4
HALF = math.pi / 2

# Guides on which the protocol injects the incoming qubit
PROTOCOL_INPUTS = (1, 3)

# Literal splitter matrix
SPLITTER_MATRIX = np.array(
    [
        [1, 1j, 0, 0],
        [0, 0, 1j, -1],
        [-1, 1j, 0, 0],
        [0, 0, 1j, 1],
    ],
    dtype=np.complex128,
) / np.sqrt(2.0)

# Literal random-basis projector matrix
PROJECTOR_MATRIX = np.array(
    [
        [1, 1j, -1, -1j],
        [1j, -1, 1j, -1],
        [-1, 1j, -1j, -1],
        [-1j, -1, -1, 1j],
    ],
    dtype=np.complex128,
) / 2.0

# Output reading narrated alongside the matrix. It disagrees with the
# matrix on every output; kept for reference, never the default.
_PROSE_OUTCOMES = {
    1: MubLabel.of("X", "D"),
    2: MubLabel.of("X", "A"),
    3: MubLabel.of("Y", "L"),
    4: MubLabel.of("Y", "R"),
}


@dataclass(frozen=True)
class ReferenceMatrices:
    S: ModeUnitary
    P: ModeUnitary

    def to_payload(self) -> ReferenceMatricesPayload:
        def dump(u: ModeUnitary) -> MatrixPayload:
            return MatrixPayload(re=u.matrix.real.tolist(), im=u.matrix.imag.tolist())

        return ReferenceMatricesPayload(S=dump(self.S), P=dump(self.P))


@lru_cache(maxsize=1)
def reference_matrices() -> ReferenceMatrices:
    return ReferenceMatrices(S=ModeUnitary(SPLITTER_MATRIX), P=ModeUnitary(PROJECTOR_MATRIX))


def splitter_circuit() -> CircuitLayout:
    """Two 3 dB couplers on (1,2) and (3,4) followed by a crossing coupler on (2,3)."""
    return CircuitLayout(
        dim=4,
        elements=[
            ElementPlacement.coupler(QUARTER, (1, 2)),
            ElementPlacement.coupler(QUARTER, (3, 4)),
            ElementPlacement.coupler(HALF, (2, 3)),
        ],
    )


def _measurement_stage() -> CircuitLayout:
    # The (3,4) block must be X_{pi/4} Z_{pi/2}: the shifter acts first.
    # The two closing Z_{pi/4} shifters lift guides 3,4 by e^{i pi/4}
    # relative to guides 1,2 so both blocks share one global phase.
    return CircuitLayout(
        dim=4,
        elements=[
            ElementPlacement.coupler(QUARTER, (1, 2)),
            ElementPlacement.phase_shifter(HALF, (3, 4)),
            ElementPlacement.coupler(QUARTER, (3, 4)),
            ElementPlacement.phase_shifter(QUARTER, (1, 3)),
            ElementPlacement.phase_shifter(QUARTER, (2, 4)),
        ],
    )


@dataclass(frozen=True)
class ProjectorBuild:
    layout: CircuitLayout
    global_phase: float


@lru_cache(maxsize=1)
def build_projector() -> ProjectorBuild:
    """
    Assemble the random-basis projector and verify it against the literal
    matrix up to one global phase.
    """
    layout = splitter_circuit().then(_measurement_stage())
    comparison = equal_up_to_global_phase(compose(layout), reference_matrices().P, tol=1e-12)
    if not comparison.equal:
        raise ConsistencyError("projector layout does not reproduce the reference projector matrix")
    logger.info(
        f"Projector verified against reference matrix, global phase {comparison.phase:.12g} rad",
        extra={"global_phase": comparison.phase},
    )
    logger.info(
        "Output labels follow the matrix: 1->X:A, 2->X:D, 3->Y:R, 4->Y:L "
        "(narrated reading 1->X:D, 2->X:A, 3->Y:L, 4->Y:R is not used)"
    )
    return ProjectorBuild(layout=layout, global_phase=comparison.phase)


def projector_circuit() -> CircuitLayout:
    """Splitter stage followed by the X/Y measurement stage."""
    return build_projector().layout


def two_mode_projector(basis: MubBasis) -> CircuitLayout:
    """
    Two-guide projector: a 3 dB coupler for basis Y, preceded by a
    Z_{pi/2} shifter for basis X.
    """
    basis = MubBasis(basis)
    if basis is MubBasis.Y:
        elements = [ElementPlacement.coupler(QUARTER, (1, 2))]
    else:
        elements = [
            ElementPlacement.phase_shifter(HALF, (1, 2)),
            ElementPlacement.coupler(QUARTER, (1, 2)),
        ]
    return CircuitLayout(dim=2, elements=elements)


@lru_cache(maxsize=None)
def outcome_interpretation(mapping: OutcomeMapping = OutcomeMapping.MATRIX) -> OutcomeInterpretation:
    """
    Output -> basis state table.

    The matrix reading sends each basis state on guides (1,3) through the
    reference projector and assigns it to the output receiving half the
    probability.
    """
    mapping = OutcomeMapping(mapping)
    if mapping is OutcomeMapping.PROSE:
        return OutcomeInterpretation(mapping=mapping, outcomes=dict(_PROSE_OUTCOMES))

    projector = reference_matrices().P
    outcomes: dict[int, MubLabel] = {}
    for label in all_mub_labels():
        probs = detection_probabilities(mub_state(label, PROTOCOL_INPUTS, 4), projector)
        output = int(np.argmax(probs)) + 1
        if not math.isclose(probs[output - 1], 0.5, abs_tol=1e-12):
            raise ConsistencyError(f"{label} does not concentrate half its probability on one output")
        outcomes[output] = label
    return OutcomeInterpretation(mapping=mapping, outcomes=outcomes)


def classify_outcome(output: int, mapping: OutcomeMapping = OutcomeMapping.MATRIX) -> tuple[MubBasis, MubLabel]:
    if output not in (1, 2, 3, 4):
        raise InvalidArgumentError(f"projector output must be 1..4, got {output}")
    label = outcome_interpretation(mapping).outcomes[output]
    return label.basis, label


def _off_protocol(state: PhotonState) -> bool:
    return not state.support() <= set(PROTOCOL_INPUTS)


def qkd_measure_batch(
    state: PhotonState,
    trials: int,
    seed: int,
    mapping: OutcomeMapping = OutcomeMapping.MATRIX,
) -> list[QkdOutcome]:
    """Repeated projective measurement of ``state`` on one seeded stream."""
    if state.dim != 4:
        raise InvalidArgumentError(f"the projector takes 4-guide states, got {state.dim}")
    off_protocol = _off_protocol(state)
    if off_protocol:
        logger.warning(
            "Input state has amplitude outside guides 1 and 3",
            extra={"support": sorted(state.support())},
        )
    probs = detection_probabilities(state, reference_matrices().P)
    outcomes = []
    for trial, index in enumerate(sample_outcomes(probs, trials, seed)):
        output = int(index) + 1
        basis, label = classify_outcome(output, mapping)
        outcomes.append(
            QkdOutcome(
                trial=trial,
                output=output,
                basis=basis,
                label=label,
                seed=seed,
                off_protocol_input=off_protocol,
            )
        )
    return outcomes


def qkd_measure(state: PhotonState, seed: int, mapping: OutcomeMapping = OutcomeMapping.MATRIX) -> QkdOutcome:
    """Single projective measurement; the first draw of the seeded stream."""
    return qkd_measure_batch(state, 1, seed, mapping)[0]
