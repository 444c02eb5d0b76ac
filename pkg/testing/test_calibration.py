"""
Direct service test - phase extraction, quadrant unwrapping, kappa law fits
and inverse design.
"""

import itertools
import math

import numpy as np
import pytest

from conftest import SEPARATIONS, published_kappa, synthetic_rows
from models.calibration import (
    PUBLISHED_GAMMA,
    PUBLISHED_KAPPA0,
    CalibrationModel,
    CouplerClass,
    CouplerMeasurement,
    DesignConstraint,
    MeasurementTable,
    SeriesFit,
)
from models.errors import FitFailureError, InfeasibleDesignError, InsufficientDataError, InvalidArgumentError
from services.calibration import CalibrationService, fold_candidates, monotone_assignments
from services.io import parse_measurement_table


@pytest.fixture
def service() -> CalibrationService:
    return CalibrationService(max_fold=4, max_workers=2)


def series_records(d_m: float, a: float, b: float, lengths=(0.5, 1.0, 1.5, 2.0)) -> list[CouplerMeasurement]:
    return [
        CouplerMeasurement.normalized(d_m, l_c, math.cos(a * l_c + b) ** 2, math.sin(a * l_c + b) ** 2)
        for l_c in lengths
    ]


def slope_fit(d_m: float, a_l: float) -> SeriesFit:
    return SeriesFit(d_m=d_m, a_l=a_l, b_l=0.0, delta_l_c=0.0, l_c=[], phases=[], fold_assignment=[], residual=0.0)


def synthetic_measurements(delta_l_c: float = 0.0) -> MeasurementTable:
    return MeasurementTable(records=[CouplerMeasurement.normalized(*row) for row in synthetic_rows(delta_l_c)])


def test_fold_candidates_are_increasing_quadrants():
    theta0 = 0.3
    expected = [0.3, math.pi - 0.3, math.pi + 0.3, 2 * math.pi - 0.3, 2 * math.pi + 0.3]
    candidates = fold_candidates(theta0, 4)
    assert candidates.tolist() == pytest.approx(expected)
    for m, value in enumerate(candidates):
        assert m * math.pi / 2 <= value <= (m + 1) * math.pi / 2


def test_extract_phase_limits(service):
    assert service.extract_phase(1.0) == 0.0
    assert service.extract_phase(0.0) == pytest.approx(math.pi / 2)
    assert service.extract_phase(0.5) == pytest.approx(math.pi / 4)
    assert service.extract_phase(1.0 + 1e-12) == 0.0


@pytest.mark.parametrize("p4", [1.1, -0.2, math.nan])
def test_extract_phase_rejects_out_of_range(service, p4):
    with pytest.raises(InvalidArgumentError):
        service.extract_phase(p4)


def test_unwrap_recovers_line(service):
    fit = service.unwrap_series(series_records(6.0, a=1.2, b=0.3))
    assert fit.a_l == pytest.approx(1.2, abs=1e-9)
    assert fit.b_l == pytest.approx(0.3, abs=1e-9)
    assert fit.delta_l_c == pytest.approx(0.25, abs=1e-9)
    assert fit.residual < 1e-9
    assert fit.phases == pytest.approx([0.9, 1.5, 2.1, 2.7], abs=1e-9)


def test_unwrap_spans_several_quadrants(service):
    fit = service.unwrap_series(series_records(3.0, a=published_kappa(3.0), b=0.0))
    assert fit.a_l == pytest.approx(published_kappa(3.0), abs=1e-9)
    assert fit.fold_assignment == sorted(fit.fold_assignment)
    assert fit.fold_assignment[-1] >= 2


def test_unwrap_slope_two(service):
    fit = service.unwrap_series(series_records(6.0, a=2.0, b=0.0))
    assert fit.a_l == pytest.approx(2.0, abs=1e-9)
    assert fit.fold_assignment == [0, 1, 1, 2]
    assert fit.fold_assignment == sorted(fit.fold_assignment)


@pytest.mark.parametrize("a, b", [(2.3877, 0.7679), (2.5, 0.99), (2.2, 0.9)])
def test_unwrap_prefers_non_negative_offset(service, a, b):
    # Slope 2*pi - a with intercept -b fits the 0.5 mm grid equally well
    fit = service.unwrap_series(series_records(6.0, a=a, b=b))
    assert fit.a_l == pytest.approx(a, abs=1e-9)
    assert fit.b_l == pytest.approx(b, abs=1e-9)
    assert fit.delta_l_c > 0


def test_unwrap_long_series(service):
    lengths = tuple(0.5 * k for k in range(1, 12))
    fit = service.unwrap_series(series_records(6.0, a=0.4, b=0.1, lengths=lengths))
    assert fit.a_l == pytest.approx(0.4, abs=1e-9)
    assert fit.b_l == pytest.approx(0.1, abs=1e-9)
    assert len(fit.fold_assignment) == 11


def test_monotone_assignments_match_brute_force():
    rng = np.random.Generator(np.random.PCG64(7))
    candidates = np.stack([fold_candidates(t, 3) for t in rng.uniform(0, math.pi / 2, size=5)])
    expected = [
        folds
        for folds in itertools.product(range(4), repeat=5)
        if all(candidates[i, folds[i]] <= candidates[i + 1, folds[i + 1]] for i in range(4))
    ]
    assert [tuple(row) for row in monotone_assignments(candidates).tolist()] == expected


def test_monotone_assignments_empty_when_phases_fall():
    candidates = np.stack([fold_candidates(t, 0) for t in (1.2, 0.4)])
    assert monotone_assignments(candidates).shape == (0, 2)


def test_unwrap_needs_two_points(service):
    with pytest.raises(InsufficientDataError):
        service.unwrap_series(series_records(6.0, 1.0, 0.0, lengths=(0.5,)))


def test_unwrap_rejects_repeated_lengths(service):
    with pytest.raises(InsufficientDataError):
        service.unwrap_series(series_records(6.0, 1.0, 0.0, lengths=(0.5, 0.5)))


def test_unwrap_rejects_mixed_series(service):
    records = series_records(6.0, 1.0, 0.0)[:2] + series_records(4.5, 1.0, 0.0)[2:]
    with pytest.raises(InvalidArgumentError):
        service.unwrap_series(records)


def test_unwrap_fails_without_folds():
    # Falling phases with a single quadrant admit no positive slope
    records = [CouplerMeasurement.normalized(6.0, l_c, p4, 1 - p4) for l_c, p4 in ((0.5, 0.2), (1.0, 0.9))]
    with pytest.raises(FitFailureError):
        CalibrationService(max_fold=0).unwrap_series(records)


def test_fit_kappa_noise_free(service):
    fits = [slope_fit(d, published_kappa(d)) for d in SEPARATIONS]
    model = service.fit_kappa(fits)
    assert model.kappa0 == pytest.approx(PUBLISHED_KAPPA0, rel=1e-9)
    assert model.gamma == pytest.approx(PUBLISHED_GAMMA, rel=1e-9)
    assert model.fit_residual < 1e-9


def test_fit_kappa_refinement_agrees(service):
    fits = [slope_fit(d, published_kappa(d)) for d in SEPARATIONS]
    plain = service.fit_kappa(fits)
    refined = service.fit_kappa(fits, refine=True)
    assert refined.kappa0 == pytest.approx(plain.kappa0, abs=1e-6)
    assert refined.gamma == pytest.approx(plain.gamma, abs=1e-6)


def test_fit_kappa_with_noise(service):
    rng = np.random.Generator(np.random.PCG64(1234))
    fits = [slope_fit(d, published_kappa(d) * (1 + rng.uniform(-0.02, 0.02))) for d in SEPARATIONS]
    model = service.fit_kappa(fits)
    assert model.gamma == pytest.approx(PUBLISHED_GAMMA, rel=0.05)
    assert model.kappa0 == pytest.approx(PUBLISHED_KAPPA0, rel=0.05)


def test_fit_kappa_needs_two_series(service):
    with pytest.raises(InsufficientDataError):
        service.fit_kappa([slope_fit(6.0, 0.4)])


def test_fit_kappa_rejects_growing_coupling(service):
    with pytest.raises(FitFailureError):
        service.fit_kappa([slope_fit(3.0, 0.2), slope_fit(6.0, 0.4)])


def test_calibrate_synthetic_table(service):
    model = service.calibrate(synthetic_measurements())
    assert len(model.series) == 4
    assert model.kappa0 == pytest.approx(PUBLISHED_KAPPA0, abs=1e-6)
    assert model.gamma == pytest.approx(PUBLISHED_GAMMA, abs=1e-6)
    assert len(model.length_profiles) == 4
    assert model.shared_delta_l_c is None


def test_calibrate_with_exclusion(service):
    model = service.calibrate(synthetic_measurements(), exclude_series=[3.0])
    assert model.excluded_series == [3.0]
    assert len(model.series) == 4
    assert model.gamma == pytest.approx(PUBLISHED_GAMMA, abs=1e-6)


def test_shared_delta_recovered(service):
    model = service.calibrate(synthetic_measurements(delta_l_c=0.1), joint_delta=True)
    assert model.shared_delta_l_c == pytest.approx(0.1, abs=1e-6)
    assert all(f.delta_l_c == pytest.approx(0.1, abs=1e-6) for f in model.series)
    assert model.gamma == pytest.approx(PUBLISHED_GAMMA, abs=1e-5)


def test_worst_series_variant(service):
    model = service.calibrate(synthetic_measurements())
    variant = service.worst_series_variant(model)
    assert variant is not None
    assert len(variant.excluded_series) == 1
    assert variant.gamma == pytest.approx(PUBLISHED_GAMMA, abs=1e-6)
    assert service.worst_series_variant(variant) is None


def test_bundled_table_calibrates(service, table_path):
    table = parse_measurement_table(table_path)
    model = service.calibrate(table)
    assert [f.d_m for f in model.series] == list(SEPARATIONS)
    assert all(f.a_l > 0 for f in model.series)
    assert all(math.isfinite(f.residual) for f in model.series)
    assert model.kappa0 > 0 and model.gamma > 0


def test_bundled_widest_separation_stays_in_first_quadrant(service, table_path):
    records = parse_measurement_table(table_path).series()[7.5]
    fit = service.unwrap_series(records)
    assert fit.fold_assignment == [0, 0, 0, 0]
    assert fit.a_l > 0


def test_classify_bundled_table(table_path):
    labels = {
        (c.d_m, c.l_c): c.label
        for c in CalibrationService.classify_couplers(parse_measurement_table(table_path), 0.05, 0.08)
        if c.label is not None
    }
    assert labels == {
        (3.0, 1.5): CouplerClass.BALANCED,
        (6.0, 1.5): CouplerClass.BALANCED,
        (4.5, 1.0): CouplerClass.CROSS,
        (4.5, 1.5): CouplerClass.CROSS,
        (3.0, 2.0): CouplerClass.CROSS,
    }


def test_design_fixed_separation(service):
    model = CalibrationModel.published()
    quarter = service.design_coupler(model, math.pi / 4, DesignConstraint.FIXED_DM, 6.0)
    half = service.design_coupler(model, math.pi / 2, DesignConstraint.FIXED_DM, 6.0)
    assert quarter.l_c == pytest.approx(2.05, abs=0.01)
    assert half.l_c == pytest.approx(2 * quarter.l_c, rel=1e-12)


def test_design_fixed_length_inverts_fixed_separation(service):
    model = CalibrationModel.published()
    forward = service.design_coupler(model, math.pi / 4, DesignConstraint.FIXED_DM, 5.0)
    back = service.design_coupler(model, math.pi / 4, DesignConstraint.FIXED_LC, forward.l_c)
    assert back.d_m == pytest.approx(5.0, abs=1e-9)
    assert service.predict_theta(model, back.d_m, back.l_c) == pytest.approx(math.pi / 4, abs=1e-12)


def test_design_offset_length(service):
    model = CalibrationModel.published()
    plain = service.design_coupler(model, math.pi / 4, DesignConstraint.FIXED_DM, 6.0)
    offset = service.design_coupler(model, math.pi / 4, DesignConstraint.FIXED_DM, 6.0, delta_l_c=0.2)
    assert offset.l_c == pytest.approx(plain.l_c - 0.2, abs=1e-12)


def test_design_infeasible(service):
    with pytest.raises(InfeasibleDesignError):
        service.design_coupler(CalibrationModel.published(), math.pi / 4, DesignConstraint.FIXED_DM, 6.0, delta_l_c=3.0)


def test_design_inside_calibrated_range(service):
    design = service.design_coupler(CalibrationModel.published(), math.pi / 4, DesignConstraint.FIXED_DM, 5.0)
    assert 0.5 <= design.l_c <= 2.0
    assert not design.extrapolated


def test_design_flags_extrapolation(service):
    design = service.design_coupler(CalibrationModel.published(), math.pi / 2, DesignConstraint.FIXED_DM, 10.0)
    assert design.extrapolated


def test_design_rejects_non_positive_target(service):
    with pytest.raises(InvalidArgumentError):
        service.design_coupler(CalibrationModel.published(), 0.0, DesignConstraint.FIXED_DM, 6.0)
