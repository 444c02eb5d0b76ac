"""
`sweep`: grating-displacement projection test, simulated or fitted.
"""

import logging
import math
from pathlib import Path
from typing import Optional

from pydantic import Field

from commands.common import GlobalOptions, OutputFormat, command_span, emit
from models.errors import InvalidArgumentError
from models.semiclassical import GratingConfig, OutputLabeling
from services.io import Angle, build_manifest, parse_sweep_table, render_csv, render_json
from services.semiclassical import SweepService
from services.states import RNG_ALGORITHM
from settings import settings


logger = logging.getLogger(__name__)

SWEEP_COLUMNS = ("dx_um", "epsilon_rad", "P1", "P2")
CLICK_COLUMNS = (*SWEEP_COLUMNS, "count1", "count2", "trials", "seed")
CURVE_COLUMNS = ("epsilon_rad", "P1", "P2")


def displacement_grid(start: float, stop: float, step: float) -> list[float]:
    """Inclusive grid start, start + step, ... <= stop."""
    if not all(math.isfinite(v) for v in (start, stop, step)):
        raise InvalidArgumentError("displacement range must be finite")
    if step <= 0 or stop < start:
        raise InvalidArgumentError(f"empty displacement range {start}..{stop} step {step}")
    count = int(math.floor((stop - start) / step + 1e-9)) + 1
    return [start + k * step for k in range(count)]


class SweepCommand(GlobalOptions):
    """Simulate P1/P2 against grating displacement, or fit a measured sweep."""

    theta: Optional[Angle] = Field(default=None, description="Coupling phase of the coupler under test")
    dx_from: float = Field(default=0.0, description="First displacement (um)")
    dx_to: float = Field(default=30.0, description="Last displacement (um)")
    dx_step: float = Field(default=1.0, description="Displacement step (um)")
    period: float = Field(default_factory=lambda: settings.grating_period_um, gt=0, description="Grating period (um)")
    trials: Optional[int] = Field(default=None, gt=0, description="Sample this many detections per position")
    fit: Optional[Path] = Field(default=None, description="Fit a sweep CSV (dx_um,epsilon_rad,P1,P2)")
    emit_curve: bool = Field(default=False, description="With --fit, also write the fitted curve at 1 degree steps")
    p1_max: float = Field(default=1.0, gt=0, description="Maximum power seen on output 1 (loss correction)")
    p2_max: float = Field(default=1.0, gt=0, description="Maximum power seen on output 2 (loss correction)")
    labeling: OutputLabeling = Field(default=OutputLabeling.TURNED_AROUND, description="turned_around or direct")

    def cli_cmd(self) -> None:
        with command_span("sweep", theta=self.theta, trials=self.trials, seed=self.seed, fit=self.fit):
            service = SweepService(self.labeling)
            if self.fit is not None:
                self._fit(service)
            else:
                self._simulate(service)

    def _fit(self, service: SweepService) -> None:
        manifest = build_manifest("sweep", inputs=[self.fit])
        records = parse_sweep_table(self.fit, self.p1_max, self.p2_max)
        fit = service.fit_sweep(records)
        curve = service.fitted_curve(fit) if self.emit_curve else None

        if self.resolved_format(OutputFormat.JSON) is OutputFormat.CSV:
            if curve is None:
                raise InvalidArgumentError("CSV output of a sweep fit is the fitted curve; add --emit-curve")
            text = render_csv(CURVE_COLUMNS, curve, manifest)
        else:
            payload = {"fit": fit.model_dump(mode="json")}
            if curve is not None:
                payload["curve"] = [{"epsilon_rad": e, "P1": p1, "P2": p2} for e, p1, p2 in curve]
            text = render_json(payload, manifest)
        emit(text, self.output)

    def _simulate(self, service: SweepService) -> None:
        if self.theta is None:
            raise InvalidArgumentError("--theta is required unless --fit is given")
        displacements = displacement_grid(self.dx_from, self.dx_to, self.dx_step)
        grating = GratingConfig(period=self.period)
        as_csv = self.resolved_format(OutputFormat.CSV) is OutputFormat.CSV

        if self.trials is None:
            records = service.sweep_table(self.theta, displacements, grating)
            manifest = build_manifest("sweep")
            if as_csv:
                rows = [(r.displacement, r.epsilon, r.P1, r.P2) for r in records]
                text = render_csv(SWEEP_COLUMNS, rows, manifest)
            else:
                text = render_json({"records": [r.model_dump() for r in records]}, manifest)
        else:
            results = service.simulate_projection_test(
                self.theta, displacements, grating, self.trials, self.seed
            )
            manifest = build_manifest("sweep", seed=self.seed, rng=RNG_ALGORITHM)
            if as_csv:
                rows = [
                    (
                        r.displacement,
                        r.epsilon,
                        *r.probabilities,
                        *r.clicks.counts,
                        r.clicks.trials,
                        r.clicks.seed,
                    )
                    for r in results
                ]
                text = render_csv(CLICK_COLUMNS, rows, manifest)
            else:
                text = render_json({"positions": [r.model_dump() for r in results]}, manifest)
        emit(text, self.output)
