"""
Direct service test - table, sweep, layout, model and state parsing plus
manifest-carrying output rendering.
"""

import io
import json
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from models.calibration import CalibrationModel, CouplerMeasurement
from models.circuit import CircuitLayout, ElementPlacement
from models.errors import InvalidArgumentError, ParseError, RecordValidationError
from services.io import (
    build_manifest,
    file_digest,
    load_calibration_model,
    load_layout,
    load_state,
    measurement_table_csv,
    parse_angle,
    parse_measurement_table,
    parse_state_spec,
    parse_sweep_table,
    read_manifest,
    render_csv,
    render_json,
    round_floats,
    run_timestamp,
)

HEADER = "d_m_um,l_c_mm,P4,P3\n"


def write(tmp_path, name: str, text: str):
    path = tmp_path / name
    path.write_text(text, encoding="utf-8")
    return path


# ---------------------------------------------------------------------------
# Characterization tables
# ---------------------------------------------------------------------------


def test_bundled_table(table_path):
    table = parse_measurement_table(table_path)
    assert len(table.records) == 16
    series = table.series()
    assert list(series) == [3.0, 4.5, 6.0, 7.5]
    assert all(len(records) == 4 for records in series.values())
    balanced = next(r for r in table.records if (r.d_m, r.l_c) == (6.0, 1.5))
    assert balanced.P4 == pytest.approx(0.493, abs=1e-12)
    assert all(r.P4 + r.P3 == pytest.approx(1.0, abs=1e-15) for r in table.records)
    assert table.metadata["source"] == str(table_path)


def test_fraction_rows_are_accepted():
    table = parse_measurement_table(io.StringIO(HEADER + "6.0,1.5,0.493,0.507\n6.0,0.5,0.807,0.193\n"))
    assert [r.l_c for r in table.records] == [0.5, 1.5]
    assert table.records[1].P4 == pytest.approx(0.493)


def test_rows_are_renormalized():
    table = parse_measurement_table(io.StringIO(HEADER + "3.0,0.5,18.0,83.0\n"))
    assert table.records[0].P4 == pytest.approx(18.0 / 101.0)
    assert table.records[0].P4 + table.records[0].P3 == 1.0


def test_normalizing_is_idempotent():
    first = CouplerMeasurement.normalized(3.0, 0.5, 17.8, 82.2)
    assert CouplerMeasurement.normalized(3.0, 0.5, first.P4, first.P3) == first
    # Sums a few ulp off 1 are not rescaled
    record = CouplerMeasurement.normalized(3.0, 0.5, 0.17800000000000002, 0.822)
    assert record.P4 == 0.17800000000000002
    assert record.P3 == 1.0 - 0.17800000000000002


def test_comments_and_blank_lines_are_skipped():
    text = "# bench run 3\n\n" + HEADER + "3.0,0.5,17.8,82.2\n\n# end\n"
    assert len(parse_measurement_table(io.StringIO(text)).records) == 1


@pytest.mark.parametrize(
    "text, line",
    [
        ("", 1),
        ("\n\n", 1),
        ("a,b,c,d\n3.0,0.5,17.8,82.2\n", 1),
        (HEADER, 1),
        (HEADER + "3.0,0.5,abc,82.2\n", 2),
        ("# note\n" + HEADER + "3.0,0.5,17.8,82.2\n3.0,1.0,,6.4\n", 4),
        (HEADER + "3.0,0.5,17.8,82.2\n3.0,1.0,93.6,6.4,1\n", 3),
        (HEADER + "3.0,0.5,17.8,82.2\n3.0,1.0,93.6\n", 3),
    ],
)
def test_malformed_tables_report_line(text, line):
    with pytest.raises(ParseError) as excinfo:
        parse_measurement_table(io.StringIO(text))
    assert excinfo.value.line == line
    assert excinfo.value.exit_code == 2


def test_invalid_records_listed():
    text = HEADER + "3.0,0.5,17.8,82.2\n3.0,1.0,50.0,10.0\n3.0,1.5,-0.5,100.5\n3.0,0.5,20.0,80.0\n"
    with pytest.raises(RecordValidationError) as excinfo:
        parse_measurement_table(io.StringIO(text))
    assert excinfo.value.rows == [3, 4, 5]
    assert excinfo.value.exit_code == 2


def test_non_positive_geometry_rejected():
    with pytest.raises(RecordValidationError) as excinfo:
        parse_measurement_table(io.StringIO(HEADER + "0.0,0.5,17.8,82.2\n"))
    assert excinfo.value.rows == [2]


def test_missing_file():
    with pytest.raises(InvalidArgumentError):
        parse_measurement_table("/nonexistent/table.csv")


def test_non_utf8_file(tmp_path):
    path = tmp_path / "binary.csv"
    path.write_bytes(b"\xff\xfe\x00d_m")
    with pytest.raises(ParseError):
        parse_measurement_table(path)


def test_table_csv_round_trip(table_path):
    table = parse_measurement_table(table_path)
    again = parse_measurement_table(io.StringIO(measurement_table_csv(table)))
    assert len(again.records) == len(table.records)
    for parsed, original in zip(again.records, table.records):
        assert (parsed.d_m, parsed.l_c) == (original.d_m, original.l_c)
        assert parsed.P4 == pytest.approx(original.P4, rel=0, abs=math.ulp(1.0))
        assert parsed.P3 == pytest.approx(original.P3, rel=0, abs=math.ulp(1.0))


# ---------------------------------------------------------------------------
# Sweep files
# ---------------------------------------------------------------------------


def test_sweep_file_is_normalized(synthetic_sweep):
    records = parse_sweep_table(synthetic_sweep)
    assert len(records) == 25
    eps = np.array([r.epsilon for r in records])
    assert_allclose([r.P1 for r in records], 0.5 * (1 + math.sin(0.6) * np.sin(eps + 0.4)), atol=1e-12)
    assert records[3].displacement == pytest.approx(eps[3] * 60.0 / (4 * math.pi))


def test_sweep_file_loss_correction():
    records = parse_sweep_table(io.StringIO("dx_um,epsilon_rad,P1,P2\n0,0,0.4,0.5\n"), p1_max=0.8, p2_max=1.0)
    assert (records[0].P1, records[0].P2) == pytest.approx((0.5, 0.5))


def test_sweep_file_rejects_dark_rows():
    text = "dx_um,epsilon_rad,P1,P2\n0,0,0.4,0.5\n1,0.2,0,0\n2,0.4,-1,0.5\n"
    with pytest.raises(RecordValidationError) as excinfo:
        parse_sweep_table(io.StringIO(text))
    assert excinfo.value.rows == [3, 4]


def test_sweep_file_header_checked():
    with pytest.raises(ParseError):
        parse_sweep_table(io.StringIO(HEADER + "3.0,0.5,17.8,82.2\n"))


# ---------------------------------------------------------------------------
# JSON documents
# ---------------------------------------------------------------------------


def test_layout_round_trip():
    layout = CircuitLayout(
        dim=4,
        elements=[ElementPlacement.coupler(math.pi / 4, (1, 2)), ElementPlacement.phase_shifter(0.3, (3, 4))],
    )
    assert load_layout(io.StringIO(layout.to_json())) == layout


def test_calibration_model_round_trip(tmp_path):
    model = CalibrationModel.published()
    path = write(tmp_path, "model.json", model.model_dump_json())
    assert load_calibration_model(path) == model


def test_calibration_model_from_fit_document(tmp_path):
    model = CalibrationModel.published()
    document = {"manifest": {"command": "fit"}, "model": model.model_dump(mode="json"), "variants": []}
    path = write(tmp_path, "fit.json", json.dumps(document))
    assert load_calibration_model(path) == model


def test_fit_document_with_broken_model(tmp_path):
    path = write(tmp_path, "fit.json", json.dumps({"manifest": {}, "model": {"gamma": 0.5}}))
    with pytest.raises(InvalidArgumentError) as excinfo:
        load_calibration_model(path)
    assert "kappa0" in str(excinfo.value)


def test_model_file_with_invalid_json(tmp_path):
    path = write(tmp_path, "fit.json", '{"model": ')
    with pytest.raises(ParseError) as excinfo:
        load_calibration_model(path)
    assert excinfo.value.line == 1


def test_invalid_json_is_parse_error():
    with pytest.raises(ParseError):
        load_layout(io.StringIO("{not json"))


def test_schema_violation_is_invalid_argument():
    with pytest.raises(InvalidArgumentError) as excinfo:
        load_layout(io.StringIO('{"dim": 2, "elements": [{"kind": "coupler", "modes": [1, 3], "theta": 0.1}]}'))
    assert "guides" in str(excinfo.value)


def test_load_state(tmp_path):
    path = write(tmp_path, "state.json", json.dumps({"dim": 2, "re": [0.6, 0.0], "im": [0.0, 0.8]}))
    assert_allclose(load_state(path).amplitudes, [0.6, 0.8j])


# ---------------------------------------------------------------------------
# Angles and state specifications
# ---------------------------------------------------------------------------


@pytest.mark.parametrize(
    "text, expected",
    [
        ("pi/4", math.pi / 4),
        ("pi/2", math.pi / 2),
        ("pi", math.pi),
        ("3pi/2", 3 * math.pi / 2),
        ("-pi/2", -math.pi / 2),
        ("π/4", math.pi / 4),
        (" 0.25 ", 0.25),
        ("1e-3", 1e-3),
        (2, 2.0),
    ],
)
def test_parse_angle(text, expected):
    assert parse_angle(text) == pytest.approx(expected, abs=1e-15)


@pytest.mark.parametrize("text", ["pi/3", "quarter", "nan", "inf", "", None])
def test_parse_angle_rejects(text):
    with pytest.raises(InvalidArgumentError):
        parse_angle(text)


def test_state_spec_mode():
    assert_allclose(parse_state_spec("mode:2", 4).amplitudes, [0, 1, 0, 0])


def test_state_spec_mub():
    state = parse_state_spec("Y:L@(1, 3)", 4)
    assert_allclose(state.amplitudes, np.array([1, 0, 1j, 0]) / math.sqrt(2))


def test_state_spec_file(tmp_path):
    path = write(tmp_path, "state.json", json.dumps({"dim": 2, "re": [1.0, 0.0], "im": [0.0, 0.0]}))
    assert_allclose(parse_state_spec(str(path), 2).amplitudes, [1, 0])
    with pytest.raises(InvalidArgumentError):
        parse_state_spec(str(path), 4)


@pytest.mark.parametrize("spec", ["X:L@(1,2)", "mode:5", "Z:D@(1,2)", "photon"])
def test_state_spec_rejects(spec):
    with pytest.raises(InvalidArgumentError):
        parse_state_spec(spec, 4)


# ---------------------------------------------------------------------------
# Output rendering
# ---------------------------------------------------------------------------


def test_round_floats():
    assert round_floats({"a": [1 / 3, 2], "b": True, "c": (0.1 + 0.2,)}) == {
        "a": [0.333333333333, 2],
        "b": True,
        "c": [0.3],
    }


def test_pinned_timestamp(pinned_timestamp):
    assert run_timestamp() == "1970-01-01T00:00:00+00:00"


def test_manifest_digests_inputs(tmp_path, pinned_timestamp):
    path = tmp_path / "input.txt"
    path.write_bytes(b"abc")
    assert file_digest(path) == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
    manifest = build_manifest("fit", inputs=[path], seed=3, rng="PCG64")
    assert manifest.input_digests == {str(path): file_digest(path)}
    assert manifest.seed == 3
    assert manifest.timestamp == "1970-01-01T00:00:00+00:00"


def test_render_csv_carries_manifest(pinned_timestamp):
    manifest = build_manifest("simulate", seed=7, rng="PCG64")
    text = render_csv(["output_index", "probability"], [(1, 1 / 3), (2, 2 / 3)], manifest)
    lines = text.splitlines()
    assert lines[0].startswith("# manifest: ")
    assert lines[1:] == ["output_index,probability", "1,0.333333333333", "2,0.666666666667"]
    assert read_manifest(text) == manifest


def test_render_json_carries_manifest(pinned_timestamp):
    manifest = build_manifest("design")
    text = render_json({"theta": math.pi}, manifest)
    document = json.loads(text)
    assert list(document) == ["manifest", "theta"]
    assert document["theta"] == 3.14159265359
    assert text.endswith("\n")
    assert read_manifest(text) == manifest


def test_read_manifest_absent():
    assert read_manifest("a,b\n1,2\n") is None
    assert read_manifest("") is None
