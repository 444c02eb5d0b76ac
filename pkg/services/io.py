"""
File formats of the command line.

Parses characterization tables, sweep files, circuit layouts, photon states
and calibration models; renders JSON and CSV outputs with a run manifest
and a fixed number of significant digits.
"""

import hashlib
import io
import json
import logging
import math
import re
from datetime import datetime, timezone
from pathlib import Path
from typing import Annotated, Any, Iterable, Optional, Sequence, TextIO, Union

import numpy as np
import pandas as pd
from pydantic import BaseModel, BeforeValidator, ValidationError

from models.calibration import CalibrationModel, CouplerMeasurement, MeasurementTable
from models.circuit import CircuitLayout
from models.errors import InvalidArgumentError, ParseError, RecordValidationError
from models.manifest import RunManifest
from models.semiclassical import SweepRecord
from models.states import MubLabel, StatePayload
from services.semiclassical import SweepService
from services.states import PhotonState, basis_state, mub_state
from settings import settings


logger = logging.getLogger(__name__)

Source = Union[str, Path, TextIO]

MEASUREMENT_COLUMNS = ("d_m_um", "l_c_mm", "P4", "P3")
SWEEP_COLUMNS = ("dx_um", "epsilon_rad", "P1", "P2")
MANIFEST_PREFIX = "# manifest: "

_ANGLE_LITERALS = {
    "pi/4": math.pi / 4,
    "pi/2": math.pi / 2,
    "pi": math.pi,
    "3pi/2": 3 * math.pi / 2,
}

_MODE_SPEC = re.compile(r"^mode:(\d+)$")
_MUB_SPEC = re.compile(r"^([XY]):([DALR])@\(\s*(\d+)\s*,\s*(\d+)\s*\)$")
_PANDAS_LINE = re.compile(r"line (\d+)")


# ============================================================================
# ANGLES
# ============================================================================


def parse_angle(value: Union[str, float, int]) -> float:
    """Decimal radians or one of pi/4, pi/2, pi, 3pi/2 (optionally negated)."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        angle = float(value)
    elif isinstance(value, str):
        text = value.strip().lower().replace(" ", "").replace("π", "pi")
        sign = -1.0 if text.startswith("-") else 1.0
        literal = _ANGLE_LITERALS.get(text.lstrip("+-"))
        if literal is not None:
            angle = sign * literal
        else:
            try:
                angle = float(text)
            except ValueError:
                raise InvalidArgumentError(
                    f"cannot read angle {value!r}; use radians or pi/4, pi/2, pi, 3pi/2"
                ) from None
    else:
        raise InvalidArgumentError(f"cannot read angle {value!r}")
    if not math.isfinite(angle):
        raise InvalidArgumentError(f"angle must be finite, got {value!r}")
    return angle


Angle = Annotated[float, BeforeValidator(parse_angle)]


# ============================================================================
# READING
# ============================================================================


def _read_source(source: Source) -> tuple[str, str]:
    if isinstance(source, (str, Path)):
        path = Path(source)
        try:
            data = path.read_bytes()
        except OSError as e:
            raise InvalidArgumentError(f"cannot read {path}: {e.strerror}") from e
        name = str(path)
    else:
        raw = source.read()
        data = raw.encode("utf-8") if isinstance(raw, str) else raw
        name = getattr(source, "name", "<stream>")
    try:
        return data.decode("utf-8"), name
    except UnicodeDecodeError:
        raise ParseError("file is not UTF-8 text", source=name) from None


def file_digest(path: Union[str, Path]) -> str:
    """sha256 hex digest of a file's bytes."""
    try:
        return hashlib.sha256(Path(path).read_bytes()).hexdigest()
    except OSError as e:
        raise InvalidArgumentError(f"cannot read {path}: {e.strerror}") from e


def _read_numeric_table(text: str, name: str, columns: Sequence[str]) -> tuple[np.ndarray, list[int]]:
    """
    Numeric rows of a headed CSV and the 1-based file line of each row.

    Blank lines and lines starting with '#' are skipped.
    """
    numbered = [
        (index + 1, line)
        for index, line in enumerate(text.splitlines())
        if line.strip() and not line.lstrip().startswith("#")
    ]
    if not numbered:
        raise ParseError("empty file", line=1, source=name)
    header_line, header = numbered[0]
    found = tuple(cell.strip() for cell in header.split(","))
    if found != tuple(columns):
        raise ParseError(
            f"expected header {','.join(columns)}, got {header.strip()!r}",
            line=header_line,
            source=name,
        )
    if len(numbered) == 1:
        raise ParseError("no data rows after the header", line=header_line, source=name)

    try:
        frame = pd.read_csv(io.StringIO("\n".join(line for _, line in numbered)), dtype=str)
    except pd.errors.ParserError as e:
        match = _PANDAS_LINE.search(str(e))
        line = numbered[int(match.group(1)) - 1][0] if match and int(match.group(1)) <= len(numbered) else None
        raise ParseError("wrong number of fields", line=line, source=name) from e

    frame.columns = list(columns)
    numeric = frame.apply(lambda column: pd.to_numeric(column.astype("string").str.strip(), errors="coerce"))
    values = numeric.to_numpy(dtype=np.float64, na_value=np.nan)
    lines = [number for number, _ in numbered[1:]]
    finite = np.isfinite(values).all(axis=1)
    if not finite.all():
        first = int(np.flatnonzero(~finite)[0])
        raise ParseError("missing or non-numeric value", line=lines[first], source=name)
    return values, lines


def parse_measurement_table(source: Source) -> MeasurementTable:
    """
    Read a characterization CSV with header ``d_m_um,l_c_mm,P4,P3``.

    Each row is read as percentages when P4 + P3 is near 100 and as
    fractions when it is near 1, then renormalized to sum exactly 1.
    """
    text, name = _read_source(source)
    values, lines = _read_numeric_table(text, name, MEASUREMENT_COLUMNS)

    tol = settings.power_sum_tol
    records: list[CouplerMeasurement] = []
    offending: list[int] = []
    seen: set[tuple[float, float]] = set()
    for (d_m, l_c, p4, p3), line in zip(values, lines):
        total = p4 + p3
        if abs(total - 100.0) <= 100.0 * tol:
            scale = 100.0
        elif abs(total - 1.0) <= tol:
            scale = 1.0
        else:
            offending.append(line)
            continue
        if d_m <= 0 or l_c <= 0 or p4 < 0 or p3 < 0 or (d_m, l_c) in seen:
            offending.append(line)
            continue
        seen.add((d_m, l_c))
        records.append(CouplerMeasurement.normalized(float(d_m), float(l_c), p4 / scale, p3 / scale))

    if offending:
        raise RecordValidationError(
            "records need d_m > 0, l_c > 0, non-negative powers summing to 1 (or 100%) and distinct (d_m, l_c)",
            rows=offending,
        )
    table = MeasurementTable(records=records, metadata={"source": name})
    logger.info(f"Parsed {len(records)} records in {len(table.series())} series from {name}")
    return table


def measurement_table_csv(table: MeasurementTable) -> str:
    """CSV form of a table with fractional powers; parses back to the same table."""
    frame = pd.DataFrame(
        [(r.d_m, r.l_c, r.P4, r.P3) for r in table.records],
        columns=list(MEASUREMENT_COLUMNS),
    )
    return frame.to_csv(index=False, lineterminator="\n")


def parse_sweep_table(source: Source, p1_max: float = 1.0, p2_max: float = 1.0) -> list[SweepRecord]:
    """
    Read a sweep CSV with header ``dx_um,epsilon_rad,P1,P2``.

    Powers may be in any common unit; each row is loss-corrected with the
    given output maxima and normalized so P1 + P2 = 1.
    """
    text, name = _read_source(source)
    values, lines = _read_numeric_table(text, name, SWEEP_COLUMNS)
    offending = [line for (_, _, p1, p2), line in zip(values, lines) if p1 < 0 or p2 < 0 or p1 + p2 == 0]
    if offending:
        raise RecordValidationError("sweep powers must be non-negative and not both zero", rows=offending)
    records = []
    for dx, epsilon, p1, p2 in values:
        c1, c2 = SweepService.correct_losses(float(p1), float(p2), p1_max, p2_max)
        records.append(SweepRecord(displacement=float(dx), epsilon=float(epsilon), P1=c1, P2=c2))
    return records


def _load_json_model(source: Source, model: type[BaseModel], unwrap: Optional[str] = None) -> Any:
    """
    Validate a JSON document against ``model``; with ``unwrap`` the object
    under that key is validated when the document carries it.
    """
    text, name = _read_source(source)
    try:
        if unwrap is None:
            return model.model_validate_json(text)
        document = json.loads(text)
        if isinstance(document, dict) and unwrap in document:
            document = document[unwrap]
        return model.model_validate(document)
    except json.JSONDecodeError as e:
        raise ParseError(f"invalid JSON: {e.msg}", line=e.lineno, source=name) from e
    except ValidationError as e:
        first = e.errors()[0]
        if first["type"] == "json_invalid":
            raise ParseError(f"invalid JSON: {first['msg']}", source=name) from e
        where = ".".join(str(part) for part in first["loc"]) or "document"
        raise InvalidArgumentError(f"{name}: {where}: {first['msg']}") from e


def load_layout(source: Source) -> CircuitLayout:
    return _load_json_model(source, CircuitLayout)


def load_calibration_model(source: Source) -> CalibrationModel:
    """A bare calibration model, or the ``model`` object of a `fit` output."""
    return _load_json_model(source, CalibrationModel, unwrap="model")


def load_state(source: Source) -> PhotonState:
    return PhotonState.from_payload(_load_json_model(source, StatePayload))


def parse_state_spec(spec: str, dim: int) -> PhotonState:
    """
    State from ``mode:<j>``, ``<X|Y>:<D|A|L|R>@(j,k)`` or a JSON file path.
    """
    text = spec.strip()
    if match := _MODE_SPEC.match(text):
        return basis_state(int(match.group(1)), dim)
    if match := _MUB_SPEC.match(text):
        try:
            label = MubLabel.of(match.group(1), match.group(2))
        except ValidationError:
            raise InvalidArgumentError(f"{match.group(2)} is not an element of basis {match.group(1)}") from None
        return mub_state(label, (int(match.group(3)), int(match.group(4))), dim)
    path = Path(text)
    if path.suffix.lower() == ".json" or path.is_file():
        state = load_state(path)
        if state.dim != dim:
            raise InvalidArgumentError(f"state in {path} has {state.dim} guides, the circuit has {dim}")
        return state
    raise InvalidArgumentError(
        f"unrecognized state {spec!r}; use mode:<j>, <X|Y>:<D|A|L|R>@(j,k) or a JSON file"
    )


# ============================================================================
# WRITING
# ============================================================================


def round_floats(value: Any, digits: Optional[int] = None) -> Any:
    """Round every float in a nested structure to ``digits`` significant digits."""
    digits = digits or settings.significant_digits
    if isinstance(value, bool):
        return value
    if isinstance(value, float):
        return float(f"{value:.{digits}g}") if math.isfinite(value) else value
    if isinstance(value, dict):
        return {key: round_floats(item, digits) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [round_floats(item, digits) for item in value]
    return value


def run_timestamp() -> str:
    if settings.source_date_epoch is not None:
        moment = datetime.fromtimestamp(settings.source_date_epoch, tz=timezone.utc)
    else:
        moment = datetime.now(timezone.utc)
    return moment.isoformat(timespec="seconds")


def build_manifest(
    command: str,
    inputs: Iterable[Union[str, Path]] = (),
    seed: Optional[int] = None,
    rng: Optional[str] = None,
) -> RunManifest:
    return RunManifest(
        command=command,
        input_digests={str(path): file_digest(path) for path in inputs},
        seed=seed,
        rng=rng,
        version=settings.app_version,
        timestamp=run_timestamp(),
    )


def render_json(payload: dict[str, Any], manifest: RunManifest) -> str:
    document = {"manifest": manifest.model_dump(mode="json"), **round_floats(payload)}
    return json.dumps(document, indent=2) + "\n"


def render_csv(columns: Sequence[str], rows: Iterable[Sequence[Any]], manifest: RunManifest) -> str:
    """CSV with the manifest as a leading ``# manifest:`` comment line."""
    buffer = io.StringIO()
    buffer.write(MANIFEST_PREFIX + manifest.model_dump_json() + "\n")
    frame = pd.DataFrame([list(row) for row in rows], columns=list(columns))
    frame.to_csv(
        buffer,
        index=False,
        float_format=f"%.{settings.significant_digits}g",
        lineterminator="\n",
    )
    return buffer.getvalue()


def read_manifest(text: str) -> Optional[RunManifest]:
    """Manifest from rendered output, JSON or CSV."""
    first = text.lstrip().splitlines()[0] if text.strip() else ""
    if first.startswith(MANIFEST_PREFIX):
        return RunManifest.model_validate_json(first[len(MANIFEST_PREFIX):])
    try:
        document = json.loads(text)
    except json.JSONDecodeError:
        return None
    if isinstance(document, dict) and "manifest" in document:
        return RunManifest.model_validate(document["manifest"])
    return None
