"""
Application settings with environment variable support.
"""

from typing import Optional

from dotenv import load_dotenv
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

# Load .env before the settings object reads the environment
load_dotenv()


class Settings(BaseSettings):
    """Toolkit settings, overridable through IQOP_* environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="IQOP_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",  # Ignore extra fields in .env that aren't defined here
    )

    app_name: str = "iqop-toolkit"
    app_version: str = "0.1.0"
    environment: str = "development"
    log_level: str = "INFO"

    # OpenTelemetry settings (off by default for a command-line tool)
    otel_enabled: bool = False
    otel_exporter_endpoint: str = "http://localhost:4317"
    otel_service_name: str = "iqop-toolkit"

    # Numerical tolerances
    unitarity_tol: float = 1e-12
    probability_sum_tol: float = 1e-9
    power_sum_tol: float = 0.02
    phase_slack: float = 1e-9

    # Calibration
    max_fold: int = 4
    calibrated_dm_range: tuple[float, float] = (3.0, 7.5)
    calibrated_lc_range: tuple[float, float] = (0.5, 2.0)
    max_workers: int = 4

    # Projection test
    grating_period_um: float = 60.0

    # Output
    significant_digits: int = 12
    # Pins manifest timestamps for reproducible output (seconds since the epoch)
    source_date_epoch: Optional[int] = Field(default=None, validation_alias="SOURCE_DATE_EPOCH")


settings = Settings()
