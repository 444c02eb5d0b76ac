"""
`design`: coupler geometry for a target coupling phase.
"""

import logging
from pathlib import Path
from typing import Optional

from pydantic import Field

from commands.common import GlobalOptions, OutputFormat, command_span, emit
from models.calibration import CalibrationModel, DesignConstraint
from models.errors import InvalidArgumentError
from services.calibration import get_calibration_service
from services.io import Angle, build_manifest, load_calibration_model, render_csv, render_json


logger = logging.getLogger(__name__)

DESIGN_COLUMNS = ("target_theta", "d_m_um", "l_c_mm", "delta_l_c", "kappa", "constraint", "extrapolated")


class DesignCommand(GlobalOptions):
    """Invert kappa(d_m) for a target theta with d_m or l_c held fixed."""

    model: Optional[Path] = Field(default=None, description="`fit` output or calibration model JSON (published law if omitted)")
    theta: Angle = Field(description="Target coupling phase: radians or pi/4, pi/2, pi, 3pi/2")
    fix_dm: Optional[float] = Field(default=None, description="Hold the separation (um) fixed")
    fix_lc: Optional[float] = Field(default=None, description="Hold the mask length (mm) fixed")
    delta_lc: float = Field(default=0.0, description="Effective extra coupling length (mm)")

    def cli_cmd(self) -> None:
        with command_span("design", theta=self.theta, model=self.model):
            if (self.fix_dm is None) == (self.fix_lc is None):
                raise InvalidArgumentError("give exactly one of --fix-dm or --fix-lc")
            inputs = [self.model] if self.model else []
            manifest = build_manifest("design", inputs=inputs)
            model = load_calibration_model(self.model) if self.model else CalibrationModel.published()

            if self.fix_dm is not None:
                constraint, value = DesignConstraint.FIXED_DM, self.fix_dm
            else:
                constraint, value = DesignConstraint.FIXED_LC, self.fix_lc
            design = get_calibration_service().design_coupler(
                model, self.theta, constraint, value, delta_l_c=self.delta_lc
            )

            if self.resolved_format(OutputFormat.JSON) is OutputFormat.CSV:
                row = (
                    design.target_theta,
                    design.d_m,
                    design.l_c,
                    design.delta_l_c,
                    design.kappa,
                    design.constraint.value,
                    design.extrapolated,
                )
                text = render_csv(DESIGN_COLUMNS, [row], manifest)
            else:
                text = render_json(
                    {
                        "design": design.model_dump(mode="json"),
                        "law": {"kappa0": model.kappa0, "gamma": model.gamma},
                    },
                    manifest,
                )
            emit(text, self.output)
