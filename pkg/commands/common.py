"""
Options and plumbing shared by every subcommand: the global flags, the
telemetry span around a command and output emission.
"""

import logging
import sys
from contextlib import contextmanager
from enum import Enum
from pathlib import Path
from typing import Iterator, Optional

from opentelemetry import metrics, trace
from pydantic import BaseModel, Field

from models.errors import InvalidArgumentError, IqopError


logger = logging.getLogger(__name__)

# Get tracer and meter for OpenTelemetry instrumentation
tracer = trace.get_tracer(__name__)
meter = metrics.get_meter(__name__)

command_counter = meter.create_counter(
    "iqop_commands_total",
    description="Total number of commands run",
    unit="1",
)

error_counter = meter.create_counter(
    "iqop_command_errors_total",
    description="Total number of commands that ended in an error",
    unit="1",
)


class OutputFormat(str, Enum):
    CSV = "csv"
    JSON = "json"


class GlobalOptions(BaseModel):
    """Flags accepted by every subcommand."""

    seed: int = Field(default=0, ge=0, le=2**64 - 1, description="Master seed for sampling")
    output: Optional[Path] = Field(default=None, description="Write here instead of standard output")
    format: Optional[OutputFormat] = Field(default=None, description="csv or json (default depends on the command)")

    def resolved_format(self, default: OutputFormat) -> OutputFormat:
        return self.format or default


@contextmanager
def command_span(name: str, **attributes) -> Iterator[trace.Span]:
    """Run a command inside a span; errors are counted, recorded and re-raised."""
    command_counter.add(1, {"command": name})
    with tracer.start_as_current_span(f"cmd_{name}") as span:
        for key, value in attributes.items():
            if value is not None:
                span.set_attribute(key, str(value) if isinstance(value, Path) else value)
        try:
            yield span
        except IqopError as e:
            span.set_attribute("exit_code", e.exit_code)
            span.record_exception(e)
            error_counter.add(1, {"command": name, "kind": e.kind})
            raise
        except Exception as e:
            span.set_attribute("exit_code", 1)
            span.record_exception(e)
            error_counter.add(1, {"command": name, "kind": "internal"})
            raise
        span.set_attribute("exit_code", 0)


def emit(text: str, output: Optional[Path]) -> None:
    """Write rendered output to ``output`` or standard output."""
    if output is None:
        sys.stdout.write(text)
        return
    try:
        output.write_text(text, encoding="utf-8")
    except OSError as e:
        raise InvalidArgumentError(f"cannot write {output}: {e.strerror}") from e
    logger.info(f"Wrote {len(text)} bytes to {output}")
