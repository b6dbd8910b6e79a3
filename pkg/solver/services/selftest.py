"""Small end-to-end checks of every solver module, run by `manage.py selftest`."""

import logging
import math

import numpy as np

from core.exceptions import KfbiError

from . import arrowhead
from .bie import gmres_solve, richardson_solve
from .correction import base_rhs, correct_rhs
from .fast_poisson import TridiagonalSystem, apply_five_point, thomas_solve
from .geometry import Side, build_boundary, control_points, side_of
from .grid import GridField, build_grid, classify_nodes, find_intersections
from .interpolation import one_sided_value, select_stencil
from .jumps import FunctionSource, InterfaceSpec, JumpData, fit_density, jumps_at
from .partition import assemble_field, exchange_ghosts, partition_grid, split_field
from .timestepper import GrayScottParams, StateUV, reaction_substep

logger = logging.getLogger(__name__)


def _close(actual, expected, tolerance, label):
    if not np.allclose(actual, expected, rtol=0.0, atol=tolerance):
        raise AssertionError(f"{label}: got {actual}, expected {expected}")


def _unit_circle():
    return build_boundary("circle", {"r": 1.0})


def check_geometry():
    circle = _unit_circle()
    _close(circle.perimeter, 2.0 * math.pi, 1e-8, "perimeter")
    frame = circle.frame(0.0)
    _close(frame.point[0], [1.0, 0.0], 1e-12, "point")
    _close(frame.normal[0], [1.0, 0.0], 1e-12, "normal")
    _close(frame.curvature[0], 1.0, 1e-10, "curvature")
    if side_of(circle, (1.0, 0.0)) != Side.INTERIOR:
        raise AssertionError("points on the curve must count as interior")
    points = control_points(circle, 16)
    _close(points.positions[4], [0.0, 1.0], 1e-10, "control point 4")


def check_grid():
    circle = _unit_circle()
    grid = build_grid((-1.2, 1.2, -1.2, 1.2), 8, 8)
    classification = classify_nodes(grid, circle)
    if classification.interior_count != 37:
        raise AssertionError(f"expected 37 interior nodes, got {classification.interior_count}")
    intersections = find_intersections(grid, classification, circle)
    if len(intersections) != 28:
        raise AssertionError(f"expected 28 intersections, got {len(intersections)}")


def check_jumps():
    circle = _unit_circle()
    points = control_points(circle, 16)
    spec = InterfaceSpec.single_layer(fit_density(points, np.ones(16)), kappa=0.0)
    jumps = jumps_at(spec, circle.frame(0.0))
    _close([jumps.v[0], jumps.vx[0], jumps.vy[0]], [0.0, 1.0, 0.0], 1e-10, "single layer jumps")


def check_correction():
    # x^2 + y^2 inside, 0 outside: [v] = 1, [dv/dn] = 2, [F] = 4 on the unit circle.
    circle = _unit_circle()
    grid = build_grid((-1.2, 1.2, -1.2, 1.2), 20, 20)
    classification = classify_nodes(grid, circle)
    intersections = find_intersections(grid, classification, circle)
    points = control_points(circle, 64)
    spec = InterfaceSpec(
        kappa=0.0,
        phi=fit_density(points, np.ones(points.count)),
        psi=fit_density(points, np.full(points.count, 2.0)),
        source=FunctionSource(lambda x, y: 4.0 + 0.0 * x),
    )
    rhs = correct_rhs(
        base_rhs(spec, grid, classification), spec, grid, classification, intersections, circle
    )
    x, y = grid.mesh()
    v = np.where(classification.inside, x * x + y * y, 0.0)
    residual = apply_five_point(v, grid.h, 0.0) - rhs.values
    _close(residual[1:-1, 1:-1], 0.0, 1e-10 / grid.h**2, "corrected residual")


def check_thomas():
    system = TridiagonalSystem(
        lower=np.full(5, -1.0), diag=np.full(5, 2.0), upper=np.full(5, -1.0)
    )
    u = thomas_solve(system.with_rhs(np.array([1.0, 0.0, 0.0, 0.0, 1.0])))
    _close(u, np.ones(5), 1e-12, "thomas")


def check_arrowhead():
    system = TridiagonalSystem(
        lower=np.full(5, -1.0), diag=np.full(5, 2.0), upper=np.full(5, -1.0)
    )
    partition, decomposed = arrowhead.decompose(system, 2)
    if partition.blocks != ((0, 2), (3, 5)) or partition.separators != (2,):
        raise AssertionError(f"unexpected split {partition}")
    u = arrowhead.solve(decomposed, np.array([1.0, 0.0, 0.0, 0.0, 1.0]))
    _close(u, np.ones(5), 1e-12, "arrowhead")


def check_interpolation():
    circle = _unit_circle()
    grid = build_grid((-1.5, 1.5, -1.5, 1.5), 30, 30)
    classification = classify_nodes(grid, circle)
    points = control_points(circle, 32)
    selection = select_stencil(grid, classification, points.positions, normals=points.normals)
    x, y = grid.mesh()
    field = grid.zeros()
    field.values[...] = x * x + y
    trace = one_sided_value(field, selection, JumpData.zeros(len(points)))
    expected = points.positions[:, 0] ** 2 + points.positions[:, 1]
    _close(trace.value, expected, 1e-10, "quadratic reproduction")


def check_iterations():
    rhs = np.array([1.0, -2.0, 3.0])
    density, stats = gmres_solve(lambda v: v, rhs, restart=5, tol=1e-12, max_restarts=2)
    _close(density, rhs, 1e-12, "gmres identity")
    density, stats = richardson_solve(lambda v: v, rhs, gamma=1.0, tol=1e-12, max_iterations=3)
    if stats.outer_iterations != 1:
        raise AssertionError(f"Richardson took {stats.outer_iterations} iterations on the identity")


def check_partition():
    grid = build_grid((0.0, 1.0, 0.0, 1.0), 10, 10)
    partition = partition_grid(grid, 2)
    values = np.arange(grid.shape[0] * grid.shape[1], dtype=float).reshape(grid.shape)
    slabs = exchange_ghosts(split_field(values, partition), partition)
    if not np.array_equal(assemble_field(slabs, grid).values, values):
        raise AssertionError("slab round trip changed the field")
    if not np.array_equal(slabs[1].left_ghost, values[partition.starts[1] - 2 : partition.starts[1]]):
        raise AssertionError("left ghost columns are wrong")


def check_reaction():
    grid = build_grid((0.0, 1.0, 0.0, 1.0), 4, 4)
    state = StateUV(
        u=GridField(grid, np.ones(grid.shape)),
        v=grid.zeros(),
        u_trace=np.ones(3),
        v_trace=np.zeros(3),
    )
    after = reaction_substep(state, 0.1, GrayScottParams())
    _close(after.u.values, 1.0, 1e-14, "equilibrium u")
    _close(after.v.values, 0.0, 1e-14, "equilibrium v")


CHECKS = [
    ("geometry", check_geometry),
    ("grid", check_grid),
    ("jumps", check_jumps),
    ("correction", check_correction),
    ("fast_poisson", check_thomas),
    ("arrowhead", check_arrowhead),
    ("interpolation", check_interpolation),
    ("bie", check_iterations),
    ("partition", check_partition),
    ("timestepper", check_reaction),
]


def run_checks(checks=None):
    """Run every check; returns (name, passed, message) triples."""
    results = []
    for name, check in checks or CHECKS:
        try:
            check()
        except (AssertionError, KfbiError) as exc:
            logger.warning("Self test %s failed: %s", name, exc)
            results.append((name, False, str(exc)))
        else:
            results.append((name, True, ""))
    return results
