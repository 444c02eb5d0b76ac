"""
Service layer for the semiclassical projection test.

Two equal weak beams with relative phase eps enter a coupler X_theta;
the normalized output probabilities follow
P_{1,2} = (1 +/- sin(2 theta) sin(eps)) / 2.
The relative phase is set by displacing a diffraction grating.
"""

import logging
import math
from typing import Optional, Sequence

import numpy as np

from models.errors import ConsistencyError, InsufficientDataError, InvalidArgumentError
from models.semiclassical import (
    DisplacementClicks,
    GratingConfig,
    OutputLabeling,
    SweepFit,
    SweepRecord,
)
from services.states import (
    WeakCoherentState,
    detection_probabilities,
    sample_clicks,
    single_photon_approx,
)
from services.unitary import coupler


logger = logging.getLogger(__name__)

# Agreement required between the propagated and closed-form probabilities
_PATH_TOL = 1e-12

# Beam amplitude for the weak coherent input; only relative phases matter
_WEAK_AMPLITUDE = 0.1


def _derived_seeds(seed: int, count: int) -> list[int]:
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1, dtype=np.uint64)[0]) for child in children]


class SweepService:
    """Projection-test simulation and fringe fitting for a single coupler."""

    def __init__(self, labeling: OutputLabeling = OutputLabeling.TURNED_AROUND):
        self.labeling = OutputLabeling(labeling)
        logger.info(f"Initialized SweepService (labeling={self.labeling.value})")

    @staticmethod
    def grating_phase(dx: float, grating: Optional[GratingConfig] = None) -> float:
        """Relative phase (rad) for a grating displacement ``dx`` (um); not wrapped."""
        grating = grating or GratingConfig()
        if not math.isfinite(dx):
            raise InvalidArgumentError(f"displacement must be finite, got {dx}")
        return 4.0 * math.pi * dx / grating.period

    def sweep_probabilities(self, theta: float, epsilons: Sequence[float]) -> np.ndarray:
        """
        Closed-form (P1, P2) per relative phase, shape (n, 2).

        The larger probability is formed first and the smaller as its
        complement, so every row sums to exactly 1.
        """
        eps = np.asarray(epsilons, dtype=np.float64)
        if not math.isfinite(theta) or not np.all(np.isfinite(eps)):
            raise InvalidArgumentError("theta and epsilons must be finite")
        swing = np.sin(2.0 * theta) * np.sin(eps)
        if self.labeling is OutputLabeling.DIRECT:
            swing = -swing
        high = 0.5 * (1.0 + np.abs(swing))
        low = 1.0 - high
        p1 = np.where(swing >= 0, high, low)
        p2 = np.where(swing >= 0, low, high)
        return np.column_stack([p1, p2])

    def propagated_probabilities(self, theta: float, epsilon: float) -> np.ndarray:
        """
        (P1, P2) from the conditional single-photon state through X_theta.

        The state is ordered (beam without phase, beam with phase eps); the
        bar port of the phase-carrying beam is output 1 when turned around.
        """
        state = single_photon_approx(WeakCoherentState.two_beam(_WEAK_AMPLITUDE, epsilon))
        probs = detection_probabilities(state, coupler(theta))
        if self.labeling is OutputLabeling.TURNED_AROUND:
            probs = probs[::-1]
        return probs

    @staticmethod
    def correct_losses(p1_meas: float, p2_meas: float, p1_max: float, p2_max: float) -> tuple[float, float]:
        """Undo the extra Y-junction loss on output 1, then normalize the pair."""
        if p1_max <= 0 or p2_max <= 0:
            raise InvalidArgumentError(f"maximum powers must be positive, got {p1_max}, {p2_max}")
        if p1_meas < 0 or p2_meas < 0:
            raise InvalidArgumentError(f"measured powers must be non-negative, got {p1_meas}, {p2_meas}")
        p1 = p1_meas * p2_max / p1_max
        total = p1 + p2_meas
        if total == 0:
            raise InvalidArgumentError("both outputs are dark; nothing to normalize")
        p1 = p1 / total
        return p1, 1.0 - p1

    def correct_records(self, records: Sequence[SweepRecord], p1_max: float, p2_max: float) -> list[SweepRecord]:
        corrected = []
        for record in records:
            p1, p2 = self.correct_losses(record.P1, record.P2, p1_max, p2_max)
            corrected.append(record.model_copy(update={"P1": p1, "P2": p2}))
        return corrected

    def fit_sweep(self, records: Sequence[SweepRecord]) -> SweepFit:
        """
        Least-squares fringe fit with the period fixed at 2*pi in eps.

        Linear in (mean, A, B) through mean + A sin(eps) + B cos(eps);
        visibility, offset and background follow in closed form.
        """
        if len(records) < 4:
            raise InsufficientDataError(f"a sweep fit needs at least 4 records, got {len(records)}")
        eps = np.array([r.epsilon for r in records])
        if eps.max() - eps.min() < math.pi:
            raise InsufficientDataError(
                f"records span {eps.max() - eps.min():.4g} rad of relative phase, need at least pi"
            )
        if len(np.unique(np.round(np.mod(eps, 2 * math.pi), 12))) < 3:
            raise InsufficientDataError("a sweep fit needs at least 3 distinct relative phases")

        totals = np.array([r.P1 + r.P2 for r in records])
        if np.any(totals <= 0):
            raise InvalidArgumentError("every record needs light on at least one output")
        p1 = np.array([r.P1 for r in records]) / totals

        design = np.column_stack([np.ones_like(eps), np.sin(eps), np.cos(eps)])
        (mean, a, b), *_ = np.linalg.lstsq(design, p1, rcond=None)
        visibility = float(2.0 * math.hypot(a, b))
        offset = float(math.atan2(b, a))
        background = float(mean - 0.5 * visibility)
        residual = float(np.sqrt(np.mean((design @ np.array([mean, a, b]) - p1) ** 2)))

        clipped = min(visibility, 1.0)
        theta_est = 0.5 * math.asin(clipped)
        fit = SweepFit(
            theta_est=theta_est,
            theta_alternate=0.5 * math.pi - theta_est,
            visibility=clipped,
            epsilon_offset=offset,
            background=background,
            excess_background=background - 0.5 * (1.0 - visibility),
            residual=residual,
            records=len(records),
        )
        logger.info(
            f"Fitted sweep: visibility={fit.visibility:.6g}, theta={fit.theta_est:.6g} rad "
            f"(or {fit.theta_alternate:.6g}), offset={fit.epsilon_offset:.6g} rad",
            extra={"records": len(records), "residual": residual},
        )
        return fit

    @staticmethod
    def fitted_curve(fit: SweepFit, step_deg: float = 1.0) -> list[tuple[float, float, float]]:
        """Fitted (eps, P1, P2) over one period, sampled every ``step_deg`` degrees."""
        eps = np.deg2rad(np.arange(0.0, 360.0 + 0.5 * step_deg, step_deg))
        p1 = fit.background + 0.5 * fit.visibility * (1.0 + np.sin(eps + fit.epsilon_offset))
        return [(float(e), float(p), float(1.0 - p)) for e, p in zip(eps, p1)]

    def sweep_table(
        self,
        theta: float,
        displacements: Sequence[float],
        grating: Optional[GratingConfig] = None,
    ) -> list[SweepRecord]:
        """Ideal sweep records at the given grating positions."""
        grating = grating or GratingConfig()
        eps = [self.grating_phase(dx, grating) for dx in displacements]
        probs = self.sweep_probabilities(theta, eps)
        return [
            SweepRecord(displacement=dx, epsilon=e, P1=float(p[0]), P2=float(p[1]))
            for dx, e, p in zip(displacements, eps, probs)
        ]

    def simulate_projection_test(
        self,
        theta: float,
        displacements: Sequence[float],
        grating: Optional[GratingConfig],
        trials: int,
        seed: int,
    ) -> list[DisplacementClicks]:
        """
        Sample detector clicks at each grating position.

        Each position gets its own seed derived from ``seed`` and the
        position index. The propagated and closed-form probabilities must
        agree before sampling.
        """
        grating = grating or GratingConfig()
        if seed < 0:
            raise InvalidArgumentError(f"seed must be non-negative, got {seed}")
        results = []
        for dx, child_seed in zip(displacements, _derived_seeds(seed, len(displacements))):
            epsilon = self.grating_phase(dx, grating)
            closed = self.sweep_probabilities(theta, [epsilon])[0]
            propagated = self.propagated_probabilities(theta, epsilon)
            deviation = float(np.max(np.abs(closed - propagated)))
            if deviation > _PATH_TOL:
                raise ConsistencyError(
                    f"propagated and closed-form probabilities differ by {deviation:.3e} at dx={dx}"
                )
            results.append(
                DisplacementClicks(
                    displacement=dx,
                    epsilon=epsilon,
                    probabilities=(float(closed[0]), float(closed[1])),
                    clicks=sample_clicks(closed, trials, child_seed),
                )
            )
        logger.info(f"Simulated projection test at {len(results)} positions ({trials} trials each)")
        return results


# Global service instance (initialized on first use)
_service_instance: Optional[SweepService] = None


def get_sweep_service() -> SweepService:
    """
    Get the singleton instance of the sweep service.

    Returns:
        The SweepService instance with the default output labeling.
    """
    global _service_instance
    if _service_instance is None:
        _service_instance = SweepService()
    return _service_instance
