"""
Service layer for directional-coupler calibration.

Turns characterization records (normalized bar/cross powers) into coupling
phases, resolves the quadrant ambiguity of arccos, fits the linear
theta(l_c) law per separation and the exponential kappa(d_m) law across
separations, and inverts the result to design coupler geometry.
"""

import logging
import math
from concurrent.futures import ThreadPoolExecutor
from typing import Iterable, Optional, Sequence

import numpy as np
from scipy.optimize import curve_fit, minimize_scalar

from models.calibration import (
    CalibrationModel,
    CouplerClass,
    CouplerClassification,
    CouplerDesign,
    CouplerMeasurement,
    DesignConstraint,
    LengthProfileFit,
    MeasurementTable,
    Provenance,
    SeriesFit,
)
from models.errors import (
    FitFailureError,
    InfeasibleDesignError,
    InsufficientDataError,
    InvalidArgumentError,
)
from settings import settings


logger = logging.getLogger(__name__)

# Two assignments whose RMS residuals differ by less than this are tied
_TIE_ABS = 1e-12
_TIE_REL = 1e-9
# Intercepts above -_INTERCEPT_TOL count as b_l >= 0 when breaking ties
_INTERCEPT_TOL = 1e-9


def fold_candidates(theta0: float, max_fold: int) -> np.ndarray:
    """
    Preimages of the arccos fold in increasing order.

    Candidate m lies in quadrant m: (m/2)pi + theta0 for even m,
    ((m+1)/2)pi - theta0 for odd m.
    """
    m = np.arange(max_fold + 1)
    return np.where(m % 2 == 0, (m // 2) * math.pi + theta0, ((m + 1) // 2) * math.pi - theta0)


def monotone_assignments(candidates: np.ndarray) -> np.ndarray:
    """
    Fold indices, one row per assignment, whose phases are nondecreasing.

    ``candidates[i, m]`` is the phase of point i on fold m. Assignments are
    grown point by point and a prefix is dropped as soon as it decreases, so
    the work follows the number of monotone assignments rather than
    (max_fold + 1) ** n.
    """
    n, width = candidates.shape
    rows = np.arange(width).reshape(-1, 1)
    for i in range(1, n):
        last = candidates[i - 1, rows[:, -1]]
        keep, fold = np.nonzero(candidates[i][None, :] >= last[:, None])
        rows = np.column_stack([rows[keep], fold])
    return rows


def _exponential(d_m, kappa0, gamma):
    return kappa0 * np.exp(-gamma * d_m)


def _matches_any(value: float, targets: Iterable[float]) -> bool:
    return any(math.isclose(value, t, abs_tol=1e-9) for t in targets)


class CalibrationService:
    """
    Calibration fits for ion-exchanged directional couplers.

    Fold search runs over quadrant indices 0..max_fold per point and only
    visits assignments whose phases are nondecreasing in l_c.
    """

    def __init__(
        self,
        max_fold: Optional[int] = None,
        max_workers: Optional[int] = None,
        phase_slack: Optional[float] = None,
    ):
        self.max_fold = settings.max_fold if max_fold is None else max_fold
        self.max_workers = settings.max_workers if max_workers is None else max_workers
        self.phase_slack = settings.phase_slack if phase_slack is None else phase_slack
        if self.max_fold < 0:
            raise InvalidArgumentError(f"max_fold must be non-negative, got {self.max_fold}")
        logger.info(f"Initialized CalibrationService (max_fold={self.max_fold}, workers={self.max_workers})")

    # ------------------------------------------------------------------
    # Phase extraction and unwrapping
    # ------------------------------------------------------------------

    def extract_phase(self, p4: float) -> float:
        """First-quadrant coupling phase arccos(sqrt(P4))."""
        if not math.isfinite(p4) or p4 < -self.phase_slack or p4 > 1.0 + self.phase_slack:
            raise InvalidArgumentError(f"P4 must lie in [0, 1], got {p4}")
        return float(np.arccos(np.sqrt(min(max(p4, 0.0), 1.0))))

    def unwrap_series(self, records: Sequence[CouplerMeasurement]) -> SeriesFit:
        """
        Assign each point of one separation series to its quadrant and fit
        theta = a_l * l_c + b_l.

        The assignment with the smallest RMS residual and a positive slope
        wins. On a regular grid the true line and its aliases fit equally
        well; ties prefer b_l >= 0, then the smallest total fold index, then
        the smallest slope. Noise-free lines are recovered when a_l times the
        grid step stays below pi/2 and b_l lies in [0, 1).
        """
        if len(records) < 2:
            raise InsufficientDataError(f"a series needs at least 2 points, got {len(records)}")
        separations = {r.d_m for r in records}
        if len(separations) != 1:
            raise InvalidArgumentError(f"records mix separations {sorted(separations)}")
        ordered = sorted(records, key=lambda r: r.l_c)
        lengths = np.array([r.l_c for r in ordered])
        if np.any(np.diff(lengths) <= 0):
            raise InsufficientDataError("series points must have distinct l_c values")
        d_m = ordered[0].d_m

        base = np.array([self.extract_phase(r.P4) for r in ordered])
        candidates = np.stack([fold_candidates(t, self.max_fold) for t in base])
        n = len(ordered)

        folds = monotone_assignments(candidates)
        if len(folds) == 0:
            raise FitFailureError(
                f"series d_m={d_m}: no quadrant assignment over folds 0..{self.max_fold} "
                f"gives a nondecreasing phase (base phases {np.round(base, 4).tolist()})"
            )
        phases = candidates[np.arange(n), folds]

        centered = lengths - lengths.mean()
        sxx = float(centered @ centered)
        slopes = phases @ centered / sxx
        intercepts = phases.mean(axis=1) - slopes * lengths.mean()
        residuals = phases - (intercepts[:, None] + slopes[:, None] * lengths)
        rms = np.sqrt(np.mean(residuals**2, axis=1))

        valid = slopes > 0
        if not np.any(valid):
            raise FitFailureError(
                f"series d_m={d_m}: no quadrant assignment over folds 0..{self.max_fold} "
                f"gives a nondecreasing phase with positive slope (base phases {np.round(base, 4).tolist()})"
            )
        best = float(rms[valid].min())
        tied = np.flatnonzero(valid & (rms <= best + max(_TIE_ABS, _TIE_REL * best)))
        # Aliases of the true line fit equally well; lexsort's last key is primary
        negative_offset = intercepts[tied] < -_INTERCEPT_TOL
        order = np.lexsort((tied, slopes[tied], folds[tied].sum(axis=1), negative_offset))
        winner = tied[order[0]]

        a_l, b_l = float(slopes[winner]), float(intercepts[winner])
        fit = SeriesFit(
            d_m=d_m,
            a_l=a_l,
            b_l=b_l,
            delta_l_c=b_l / a_l,
            l_c=lengths.tolist(),
            phases=phases[winner].tolist(),
            fold_assignment=folds[winner].tolist(),
            residual=float(rms[winner]),
        )
        logger.debug(
            f"Unwrapped series d_m={d_m}: a_l={a_l:.6g}, b_l={b_l:.6g}, "
            f"folds={fit.fold_assignment}, rms={fit.residual:.3g}"
        )
        return fit

    def unwrap_table(
        self,
        table: MeasurementTable,
        exclude_series: Sequence[float] = (),
    ) -> list[SeriesFit]:
        """
        Unwrap every series concurrently.

        A failure in a series listed in ``exclude_series`` is logged and the
        series dropped; a failure anywhere else propagates.
        """
        grouped = list(table.series().items())

        def run(item: tuple[float, list[CouplerMeasurement]]) -> Optional[SeriesFit]:
            d_m, records = item
            try:
                return self.unwrap_series(records)
            except (FitFailureError, InsufficientDataError) as e:
                if _matches_any(d_m, exclude_series):
                    logger.warning(f"Excluded series d_m={d_m} could not be unwrapped: {e}")
                    return None
                raise

        with ThreadPoolExecutor(max_workers=max(1, self.max_workers)) as pool:
            fits = list(pool.map(run, grouped))
        return [f for f in fits if f is not None]

    # ------------------------------------------------------------------
    # Exponential laws
    # ------------------------------------------------------------------

    def fit_kappa(self, fits: Sequence[SeriesFit], refine: bool = False) -> CalibrationModel:
        """
        Fit kappa(d_m) = kappa0 * exp(-gamma * d_m) to the series slopes by
        least squares on ln(a_l); ``refine`` adds a nonlinear pass on a_l.
        """
        if len(fits) < 2:
            raise InsufficientDataError(f"fitting kappa needs at least 2 series, got {len(fits)}")
        d = np.array([f.d_m for f in fits])
        a = np.array([f.a_l for f in fits])
        if len(np.unique(d)) < 2:
            raise InsufficientDataError("fitting kappa needs at least 2 distinct separations")
        if np.any(a <= 0):
            raise InvalidArgumentError(f"series slopes must be positive, got {a.tolist()}")

        slope, intercept = np.polyfit(d, np.log(a), 1)
        kappa0, gamma = float(np.exp(intercept)), float(-slope)
        if refine:
            (kappa0, gamma), _ = curve_fit(_exponential, d, a, p0=(kappa0, gamma))
            kappa0, gamma = float(kappa0), float(gamma)
        if kappa0 <= 0 or gamma <= 0:
            raise FitFailureError(
                f"kappa does not decay with separation (kappa0={kappa0:.4g}, gamma={gamma:.4g})"
            )

        predicted = _exponential(d, kappa0, gamma)
        relative_rms = float(np.sqrt(np.mean(((a - predicted) / predicted) ** 2)))
        logger.info(
            f"Fitted kappa law: kappa0={kappa0:.6g} rad/mm, gamma={gamma:.6g} 1/um",
            extra={"series_count": len(fits), "fit_residual": relative_rms},
        )
        return CalibrationModel(
            series=list(fits),
            kappa0=kappa0,
            gamma=gamma,
            fit_residual=relative_rms,
        )

    def fit_length_profiles(self, fits: Sequence[SeriesFit]) -> list[LengthProfileFit]:
        """Per-l_c exponential fits theta = a_e * exp(-b_e * d_m) over the unwrapped phases."""
        by_length: dict[float, list[tuple[float, float]]] = {}
        for fit in fits:
            for l_c, theta in zip(fit.l_c, fit.phases):
                by_length.setdefault(l_c, []).append((fit.d_m, theta))

        profiles = []
        for l_c, points in sorted(by_length.items()):
            points = [(d, t) for d, t in points if t > 0]
            if len({d for d, _ in points}) < 2:
                continue
            d = np.array([p[0] for p in points])
            theta = np.array([p[1] for p in points])
            slope, intercept = np.polyfit(d, np.log(theta), 1)
            a_e, b_e = float(np.exp(intercept)), float(-slope)
            residual = float(np.sqrt(np.mean((theta - _exponential(d, a_e, b_e)) ** 2)))
            profiles.append(LengthProfileFit(l_c=l_c, a_e=a_e, b_e=b_e, residual=residual))
        return profiles

    def fit_shared_delta(self, fits: Sequence[SeriesFit]) -> tuple[float, list[SeriesFit]]:
        """
        One delta_l_c for all series, folds kept from per-series unwrapping.

        For a trial delta each slope has the closed form
        sum(theta * L) / sum(L^2) with L = l_c + delta.
        """
        if not fits:
            raise InsufficientDataError("no series to fit a shared delta_l_c")
        series = [(np.array(f.l_c), np.array(f.phases)) for f in fits]
        shortest = min(float(l.min()) for l, _ in series)

        def slopes(delta: float) -> list[float]:
            return [float(t @ (l + delta) / ((l + delta) @ (l + delta))) for l, t in series]

        def total_sse(delta: float) -> float:
            return sum(
                float(np.sum((t - a * (l + delta)) ** 2)) for (l, t), a in zip(series, slopes(delta))
            )

        result = minimize_scalar(
            total_sse,
            bounds=(-0.99 * shortest, 10.0 * max(float(l.max()) for l, _ in series)),
            method="bounded",
            options={"xatol": 1e-12},
        )
        delta = float(result.x)
        refit = []
        for fit, (l, t), a in zip(fits, series, slopes(delta)):
            if a <= 0:
                raise FitFailureError(f"series d_m={fit.d_m} has non-positive slope under a shared delta_l_c")
            rms = float(np.sqrt(np.mean((t - a * (l + delta)) ** 2)))
            refit.append(
                fit.model_copy(update={"a_l": a, "b_l": a * delta, "delta_l_c": delta, "residual": rms})
            )
        logger.info(f"Shared delta_l_c = {delta:.6g} mm over {len(fits)} series")
        return delta, refit

    def calibrate(
        self,
        table: MeasurementTable,
        exclude_series: Sequence[float] = (),
        joint_delta: bool = False,
        refine: bool = False,
        provenance: Optional[Provenance] = None,
    ) -> CalibrationModel:
        """Unwrap, optionally share delta_l_c, and fit kappa(d_m) on the kept series."""
        fits = self.unwrap_table(table, exclude_series)
        shared_delta = None
        if joint_delta:
            shared_delta, fits = self.fit_shared_delta(fits)
        kept = [f for f in fits if not _matches_any(f.d_m, exclude_series)]
        model = self.fit_kappa(kept, refine=refine)
        return model.model_copy(
            update={
                "series": fits,
                "excluded_series": sorted(float(d) for d in exclude_series),
                "shared_delta_l_c": shared_delta,
                "length_profiles": self.fit_length_profiles(fits),
                "provenance": provenance or Provenance(),
            }
        )

    def worst_series_variant(self, model: CalibrationModel, refine: bool = False) -> Optional[CalibrationModel]:
        """
        Refit kappa without the kept series of largest unwrap residual.

        Returns None unless at least three series remain afterwards.
        """
        kept = [f for f in model.series if not _matches_any(f.d_m, model.excluded_series)]
        if len(kept) - 1 < 3:
            return None
        worst = max(kept, key=lambda f: f.residual)
        variant = self.fit_kappa([f for f in kept if f is not worst], refine=refine)
        logger.info(
            f"Variant without d_m={worst.d_m}: kappa0={variant.kappa0:.6g}, gamma={variant.gamma:.6g}",
            extra={"excluded": worst.d_m, "residual": worst.residual},
        )
        return variant.model_copy(
            update={
                "series": list(model.series),
                "excluded_series": sorted([*model.excluded_series, worst.d_m]),
                "shared_delta_l_c": model.shared_delta_l_c,
                "length_profiles": model.length_profiles,
                "provenance": model.provenance,
            }
        )

    # ------------------------------------------------------------------
    # Prediction and design
    # ------------------------------------------------------------------

    @staticmethod
    def predict_kappa(model: CalibrationModel, d_m: float) -> float:
        """Coupling coefficient (rad/mm) at separation ``d_m`` (um)."""
        if not math.isfinite(d_m):
            raise InvalidArgumentError(f"d_m must be finite, got {d_m}")
        return float(model.kappa0 * math.exp(-model.gamma * d_m))

    def predict_theta(self, model: CalibrationModel, d_m: float, l_c: float, delta_l_c: float = 0.0) -> float:
        return self.predict_kappa(model, d_m) * (l_c + delta_l_c)

    def design_coupler(
        self,
        model: CalibrationModel,
        target_theta: float,
        constraint: DesignConstraint,
        value: float,
        delta_l_c: float = 0.0,
    ) -> CouplerDesign:
        """
        Geometry realizing ``target_theta`` with either the separation or the
        mask length held at ``value``.
        """
        if not math.isfinite(target_theta) or target_theta <= 0:
            raise InvalidArgumentError(f"target theta must be positive, got {target_theta}")
        if not math.isfinite(value) or value <= 0:
            raise InvalidArgumentError(f"constrained value must be positive, got {value}")
        constraint = DesignConstraint(constraint)

        if constraint is DesignConstraint.FIXED_DM:
            d_m = value
            kappa = self.predict_kappa(model, d_m)
            l_c = target_theta / kappa - delta_l_c
            if l_c <= 0:
                raise InfeasibleDesignError(
                    f"theta={target_theta:.6g} at d_m={d_m} needs l_c={l_c:.6g} mm (non-positive)"
                )
        else:
            l_c = value
            effective = l_c + delta_l_c
            if effective <= 0:
                raise InfeasibleDesignError(f"effective length {effective:.6g} mm is non-positive")
            d_m = math.log(model.kappa0 * effective / target_theta) / model.gamma
            if d_m <= 0:
                raise InfeasibleDesignError(
                    f"theta={target_theta:.6g} at l_c={l_c} needs d_m={d_m:.6g} um (non-positive)"
                )
            kappa = self.predict_kappa(model, d_m)

        dm_low, dm_high = settings.calibrated_dm_range
        lc_low, lc_high = settings.calibrated_lc_range
        extrapolated = not (dm_low <= d_m <= dm_high and lc_low <= l_c <= lc_high)
        if extrapolated:
            logger.warning(
                f"Design (d_m={d_m:.4g} um, l_c={l_c:.4g} mm) lies outside the calibrated range",
                extra={"d_m": d_m, "l_c": l_c},
            )
        return CouplerDesign(
            target_theta=target_theta,
            d_m=d_m,
            l_c=l_c,
            delta_l_c=delta_l_c,
            kappa=kappa,
            constraint=constraint,
            extrapolated=extrapolated,
        )

    @staticmethod
    def classify_couplers(
        table: MeasurementTable,
        balance_tol: float,
        cross_tol: float,
    ) -> list[CouplerClassification]:
        """Flag near-3 dB and near-full-cross elements."""
        labeled = []
        for record in table.records:
            label = None
            if abs(record.P4 - 0.5) <= balance_tol:
                label = CouplerClass.BALANCED
            elif record.P3 >= 1.0 - cross_tol:
                label = CouplerClass.CROSS
            labeled.append(
                CouplerClassification(d_m=record.d_m, l_c=record.l_c, P4=record.P4, P3=record.P3, label=label)
            )
        return labeled


# Global service instance (initialized on first use)
_service_instance: Optional[CalibrationService] = None


def get_calibration_service() -> CalibrationService:
    """
    Get the singleton instance of the calibration service.

    Returns:
        The CalibrationService instance.
    """
    global _service_instance
    if _service_instance is None:
        _service_instance = CalibrationService()
    return _service_instance
