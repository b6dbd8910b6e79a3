from unittest import mock

import numpy as np
import pytest

from core.exceptions import (
    AnisotropicGridError,
    BoundaryEscapesBoxError,
    InvalidParameterError,
    ResolutionError,
)
from solver.services import grid as grid_module
from solver.services.geometry import build_boundary
from solver.services.grid import (
    GridField,
    Orientation,
    build_grid,
    classify_nodes,
    find_intersections,
)

from .conftest import UNIT_BOX


def test_spacing_and_shape():
    grid = build_grid(UNIT_BOX, 12, 12)
    assert grid.h == pytest.approx(0.2)
    assert grid.shape == (13, 13)
    assert grid.x[0] == -1.2
    assert grid.x[-1] == pytest.approx(1.2)


def test_anisotropic_grid_is_rejected():
    with pytest.raises(AnisotropicGridError):
        build_grid(UNIT_BOX, 12, 24)


def test_empty_box_is_rejected():
    with pytest.raises(InvalidParameterError):
        build_grid((1.0, -1.0, 0.0, 1.0), 4, 4)


def test_field_shape_must_match_grid(coarse_grid):
    with pytest.raises(InvalidParameterError):
        GridField(coarse_grid, np.zeros((3, 3)))


def test_coarse_circle_classification(coarse_grid, coarse_classification):
    x, y = coarse_grid.mesh()
    brute_force = x * x + y * y <= 1.0
    assert coarse_classification.interior_count == 37
    np.testing.assert_array_equal(coarse_classification.inside, brute_force)


def test_coarse_circle_intersections(coarse_grid, coarse_intersections):
    assert len(coarse_intersections) == 28
    middle_row = coarse_intersections.subset(
        coarse_intersections.x_edges & (coarse_intersections.j == 4)
    )
    crossings = np.sort(middle_row.position[:, 0])
    np.testing.assert_allclose(crossings, [-1.0, 1.0], atol=1e-10)
    np.testing.assert_allclose(middle_row.position[:, 1], 0.0, atol=1e-14)


def test_intersections_lie_on_the_curve(unit_circle, coarse_intersections):
    np.testing.assert_allclose(np.hypot(*coarse_intersections.position.T), 1.0, atol=1e-10)


def test_intersections_are_sorted_by_edge(coarse_intersections):
    orientation = coarse_intersections.orientation
    assert np.all(np.diff(orientation) >= 0)
    for kind in (Orientation.X_EDGE, Orientation.Y_EDGE):
        subset = coarse_intersections.subset(orientation == kind)
        keys = subset.i * 100 + subset.j
        assert np.all(np.diff(keys) > 0)


def test_irregular_nodes_touch_a_crossed_edge(coarse_classification, coarse_intersections):
    touched = np.zeros_like(coarse_classification.irregular)
    touched[coarse_intersections.i, coarse_intersections.j] = True
    touched[coarse_intersections.far_end()] = True
    np.testing.assert_array_equal(touched, coarse_classification.irregular)


def test_node_on_curve_counts_as_interior(unit_circle):
    grid = build_grid(UNIT_BOX, 12, 12)
    classification = classify_nodes(grid, unit_circle)
    # Node (6, 11) sits at (0, 1) up to rounding.
    np.testing.assert_allclose(grid.node(6, 11), [0.0, 1.0], atol=1e-14)
    assert classification.inside[6, 11]
    assert classification.irregular[6, 11]


def test_tiny_circle_has_no_interior_nodes(coarse_grid):
    tiny = build_boundary("circle", {"r": 0.01}, center=(0.05, 0.05))
    classification = classify_nodes(coarse_grid, tiny)
    assert classification.interior_count == 0
    assert len(find_intersections(coarse_grid, classification, tiny)) == 0


def test_boundary_escaping_the_box(coarse_grid):
    with pytest.raises(BoundaryEscapesBoxError):
        classify_nodes(coarse_grid, build_boundary("circle", {"r": 2.0}))


def test_clearance_warning():
    grid = build_grid((-1.1, 1.1, -1.1, 1.1), 22, 22)
    with mock.patch.object(grid_module.logger, "warning") as warning:
        classify_nodes(grid, build_boundary("circle", {"r": 1.0}))
    warning.assert_called_once()


def test_edge_crossed_twice_is_under_resolved(coarse_grid):
    sliver = build_boundary("ellipse", {"ra": 1.0, "rb": 0.05}, center=(0.0, 0.15))
    classification = classify_nodes(coarse_grid, sliver)
    with pytest.raises(ResolutionError):
        find_intersections(coarse_grid, classification, sliver)


def test_classification_rows(coarse_classification):
    rows = list(coarse_classification.rows())
    assert len(rows) == 81
    assert rows[0] == (0, 0, "exterior", False)
    assert rows[4 * 9 + 4] == (4, 4, "interior", False)
