"""
Command-line entry point for the integrated quantum optical projector toolkit.

Subcommands:
- fit: calibrate kappa(d_m) from a characterization table
- design: coupler geometry for a target coupling phase
- simulate: probabilities and clicks for a circuit and state
- sweep: grating-driven projection test, simulated or fitted
- qkd-sim: random-basis projective measurement

Exit codes: 0 success, 1 domain failure, 2 input error.
"""

# Load environment variables FIRST before any other imports
from dotenv import load_dotenv

load_dotenv()

import logging
import sys
from typing import Optional, Sequence

from pydantic import ValidationError
from pydantic_settings import BaseSettings, CliApp, CliSubCommand, SettingsConfigDict, SettingsError

# OpenTelemetry imports
from opentelemetry import metrics, trace
from opentelemetry.sdk.trace import TracerProvider
from opentelemetry.sdk.trace.export import BatchSpanProcessor
from opentelemetry.sdk.metrics import MeterProvider
from opentelemetry.sdk.metrics.export import PeriodicExportingMetricReader
from opentelemetry.sdk.resources import Resource
from opentelemetry.exporter.otlp.proto.grpc.trace_exporter import OTLPSpanExporter
from opentelemetry.exporter.otlp.proto.grpc.metric_exporter import OTLPMetricExporter

from commands import DesignCommand, FitCommand, QkdSimCommand, SimulateCommand, SweepCommand
from models.errors import IqopError
from settings import settings


# ============================================================================
# LOGGING CONFIGURATION
# ============================================================================

# Standard output carries results; logs go to standard error
logging.basicConfig(
    level=settings.log_level,
    format='{"timestamp":"%(asctime)s","level":"%(levelname)s","name":"%(name)s","message":"%(message)s"}',
    datefmt="%Y-%m-%dT%H:%M:%S",
    stream=sys.stderr,
)
logger = logging.getLogger(__name__)


# ============================================================================
# OPENTELEMETRY SETUP
# ============================================================================

_telemetry_ready = False


def setup_telemetry() -> None:
    """Configure OpenTelemetry tracing and metrics."""
    global _telemetry_ready
    if _telemetry_ready:
        return
    _telemetry_ready = True
    if not settings.otel_enabled:
        logger.debug("OpenTelemetry disabled")
        return

    # Create resource with service information
    resource = Resource.create({
        "service.name": settings.otel_service_name,
        "service.version": settings.app_version,
        "deployment.environment": settings.environment,
    })

    # Setup tracing
    trace_provider = TracerProvider(resource=resource)
    trace_exporter = OTLPSpanExporter(endpoint=settings.otel_exporter_endpoint)
    trace_provider.add_span_processor(BatchSpanProcessor(trace_exporter))
    trace.set_tracer_provider(trace_provider)

    # Setup metrics
    metric_reader = PeriodicExportingMetricReader(
        OTLPMetricExporter(endpoint=settings.otel_exporter_endpoint)
    )
    metric_provider = MeterProvider(resource=resource, metric_readers=[metric_reader])
    metrics.set_meter_provider(metric_provider)

    logger.info(f"OpenTelemetry initialized: {settings.otel_exporter_endpoint}")


# ============================================================================
# COMMAND LINE
# ============================================================================

class IqopCli(BaseSettings):
    """Model, calibrate and simulate integrated quantum optical projectors."""

    model_config = SettingsConfigDict(
        cli_prog_name="iqop",
        cli_kebab_case=True,
        cli_implicit_flags=True,
        cli_enforce_required=True,
        env_prefix="IQOP_CLI_",
    )

    fit: CliSubCommand[FitCommand]
    design: CliSubCommand[DesignCommand]
    simulate: CliSubCommand[SimulateCommand]
    sweep: CliSubCommand[SweepCommand]
    qkd_sim: CliSubCommand[QkdSimCommand]

    def cli_cmd(self) -> None:
        CliApp.run_subcommand(self)


def _validation_message(error: ValidationError) -> str:
    first = error.errors()[0]
    where = ".".join(str(part) for part in first["loc"])
    return f"{where}: {first['msg']}" if where else first["msg"]


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Run one subcommand and return its exit code."""
    setup_telemetry()
    args = list(sys.argv[1:] if argv is None else argv)
    try:
        CliApp.run(IqopCli, cli_args=args)
    except SystemExit as e:
        # argparse exits 2 on bad usage and 0 on --help
        if e.code is None:
            return 0
        return e.code if isinstance(e.code, int) else 2
    except IqopError as e:
        logger.error(f"Command failed: {e.message}", extra={"kind": e.kind, "exit_code": e.exit_code})
        print(e.diagnostic(), file=sys.stderr)
        return e.exit_code
    except SettingsError as e:
        logger.error(f"Invalid command line: {e}")
        print(f"invalid-argument: {e}", file=sys.stderr)
        return 2
    except ValidationError as e:
        logger.error("Invalid arguments", extra={"errors": e.errors()})
        print(f"invalid-argument: {_validation_message(e)}", file=sys.stderr)
        return 2
    except Exception as e:
        logger.error(f"Unhandled error: {e}", exc_info=True)
        print(f"internal-error: {e}", file=sys.stderr)
        return 1
    return 0


# ============================================================================
# APPLICATION ENTRY POINT
# ============================================================================

if __name__ == "__main__":
    sys.exit(main())
