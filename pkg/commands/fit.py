"""
`fit`: calibrate kappa(d_m) from a characterization table.
"""

import logging
from pathlib import Path

from pydantic import Field
from pydantic_settings import CliPositionalArg

from commands.common import GlobalOptions, OutputFormat, command_span, emit
from models.calibration import CalibrationModel, Provenance
from services.calibration import get_calibration_service
from services.io import build_manifest, parse_measurement_table, render_csv, render_json


logger = logging.getLogger(__name__)

SERIES_COLUMNS = ("d_m_um", "a_l", "b_l", "delta_l_c", "residual", "excluded")


class FitCommand(GlobalOptions):
    """Fit the per-separation theta(l_c) lines and the kappa(d_m) law."""

    table: CliPositionalArg[Path] = Field(description="Characterization CSV (d_m_um,l_c_mm,P4,P3)")
    exclude_series: list[float] = Field(default_factory=list, description="Separations left out of the kappa fit")
    joint_delta: bool = Field(default=False, description="Fit one delta_l_c shared by all series")
    refine: bool = Field(default=False, description="Nonlinear refinement of the kappa law")
    variants: bool = Field(default=True, description="Also report the fit without the worst-residual series")
    balance_tol: float = Field(default=0.05, ge=0, description="|P4 - 0.5| bound for a 3 dB coupler")
    cross_tol: float = Field(default=0.08, ge=0, description="1 - P3 bound for a full-cross coupler")

    def cli_cmd(self) -> None:
        with command_span("fit", table=self.table, exclude_series=str(self.exclude_series)) as span:
            manifest = build_manifest("fit", inputs=[self.table])
            table = parse_measurement_table(self.table)
            service = get_calibration_service()
            model = service.calibrate(
                table,
                exclude_series=self.exclude_series,
                joint_delta=self.joint_delta,
                refine=self.refine,
                provenance=Provenance(
                    input_digest=manifest.input_digests[str(self.table)],
                    timestamp=manifest.timestamp,
                ),
            )
            span.set_attribute("series_count", len(model.series))
            variant = service.worst_series_variant(model, refine=self.refine) if self.variants else None

            if self.resolved_format(OutputFormat.JSON) is OutputFormat.CSV:
                text = render_csv(SERIES_COLUMNS, self._series_rows(model), manifest)
            else:
                payload = {
                    "model": model.model_dump(mode="json"),
                    "variants": [variant.model_dump(mode="json", exclude={"series", "length_profiles"})]
                    if variant
                    else [],
                    "classification": [
                        c.model_dump(mode="json")
                        for c in service.classify_couplers(table, self.balance_tol, self.cross_tol)
                    ],
                }
                text = render_json(payload, manifest)
            emit(text, self.output)
            logger.info(
                f"Calibration complete: kappa0={model.kappa0:.6g} rad/mm, gamma={model.gamma:.6g} 1/um"
            )

    @staticmethod
    def _series_rows(model: CalibrationModel) -> list[tuple]:
        excluded = set(model.excluded_series)
        return [
            (f.d_m, f.a_l, f.b_l, f.delta_l_c, f.residual, f.d_m in excluded)
            for f in model.series
        ]
