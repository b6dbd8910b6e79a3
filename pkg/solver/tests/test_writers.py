import json

import numpy as np
import pytest
from django.core.exceptions import ValidationError

from solver.services.convergence import TABLE_HEADER, ErrorRow, observed_order
from solver.services.geometry import build_boundary
from solver.services.grid import GridField, build_grid, classify_nodes
from solver.services.writers import (
    build_report,
    read_field_csv,
    write_classification,
    write_field,
    write_report,
    write_table,
)


@pytest.fixture
def small_field():
    grid = build_grid((-1.0, 1.0, -1.0, 1.0), 2, 2)
    x, y = grid.mesh()
    classification = classify_nodes(grid, build_boundary("circle", {"r": 0.5}))
    return GridField(grid, x + 10 * y), classification


def test_csv_has_one_row_per_node(small_field, tmp_path):
    field, classification = small_field
    path = tmp_path / "field.csv"
    write_field(field, classification, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 10
    assert lines[0] == "x,y,value,inside"


def test_csv_values_round_trip(small_field, tmp_path):
    field, classification = small_field
    path = tmp_path / "field.csv"
    write_field(field, classification, path)
    x, y, value, inside = read_field_csv(path)
    np.testing.assert_array_equal(value, x + 10 * y)
    assert inside.sum() == 1
    assert inside[4] and (x[4], y[4]) == (0.0, 0.0)


def test_vtk_header(small_field, tmp_path):
    field, classification = small_field
    path = tmp_path / "field.vtk"
    write_field(field, classification, path, format="vtk")
    lines = path.read_text().splitlines()
    assert "DIMENSIONS 3 3 1" in lines
    assert "ORIGIN -1 -1 0" in lines
    assert "SPACING 1 1 1" in lines
    assert "POINT_DATA 9" in lines
    data = lines[-3:]
    assert data[0].split() == ["nan", "nan", "nan"]
    assert data[1].split() == ["nan", "0", "nan"]


def test_error_table(tmp_path):
    rows = [
        ErrorRow(grid=32, h=0.075, e_inf=1e-3, e_l2=5e-4, iters=9),
        ErrorRow(grid=64, h=0.0375, e_inf=2.5e-4, e_l2=1.25e-4, order_inf=2.0, order_l2=2.0, iters=10),
        ErrorRow(grid=8, h=0.3, failure="near-box: too close"),
    ]
    path = tmp_path / "table.csv"
    write_table(rows, path)
    header, first, second, failed = path.read_text().splitlines()
    assert header == ",".join(TABLE_HEADER)
    assert first.split(",")[4:6] == ["", ""]
    assert second.split(",")[4] == "2"
    assert failed.split(",")[2:4] == ["FAILED", "FAILED"]


def test_observed_order():
    assert observed_order(1e-3, 2.5e-4, 2.0) == pytest.approx(2.0)
    assert observed_order(None, 1e-3, 2.0) is None
    assert observed_order(0.0, 1e-3, 2.0) is None


def test_report_is_written(tmp_path):
    report = build_report("solve", {"grid": {"n": 32}}, stats={"scheme": "gmres"}, wall_time=0.5)
    path = tmp_path / "report.json"
    write_report(report, path)
    stored = json.loads(path.read_text())
    assert stored["schema_version"] == "1"
    assert stored["workers"] == 1
    assert stored["stats"] == {"scheme": "gmres"}
    assert stored["table"] is None


def test_report_with_bad_schema_version(tmp_path):
    report = build_report("solve", {"grid": {"n": 32}})
    report["schema_version"] = "0"
    with pytest.raises(ValidationError) as excinfo:
        write_report(report, tmp_path / "report.json")
    assert "report.schema_version" in " ".join(excinfo.value.messages)
    assert not (tmp_path / "report.json").exists()


def test_report_with_unknown_command(tmp_path):
    report = build_report("mesh", {"grid": {"n": 32}})
    with pytest.raises(ValidationError):
        write_report(report, tmp_path / "report.json")


def test_classification_dump(small_field, tmp_path):
    _, classification = small_field
    path = tmp_path / "classification.csv"
    write_classification(classification, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "i,j,side,irregular"
    assert len(lines) == 10
    assert lines[5] == "1,1,interior,1"
