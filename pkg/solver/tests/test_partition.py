import json

import numpy as np
import pytest

from core.exceptions import InvalidParameterError, TooManyWorkersError
from solver.services.bie import BvpSpec, SolverOptions, build_operator, solve
from solver.services.fast_poisson import apply_five_point, make_plan, solve_interface_system
from solver.services.geometry import control_points
from solver.services.grid import GridField, build_grid
from solver.services.manufactured import get_exact_solution
from solver.services.operators import KfbiGeometry, KfbiOperator
from solver.services.partition import (
    GHOST_WIDTH,
    DistributedKfbiOperator,
    MessageLog,
    MessageTag,
    assemble_field,
    control_owners,
    distributed_solve_interface,
    exchange_ghosts,
    gather_boundary,
    partition_grid,
    scatter_boundary,
    split_field,
)

from .conftest import UNIT_BOX


def _grid(cells):
    return build_grid((0.0, 1.0, 0.0, 1.0), cells, cells)


def test_even_slabs():
    partition = partition_grid(_grid(16), 4)
    assert partition.widths == [4, 4, 4, 4]
    assert partition.starts == (0, 4, 8, 12)
    assert partition.stops == (4, 8, 12, 17)


def test_uneven_slabs():
    assert partition_grid(_grid(10), 3).widths == [4, 3, 3]


def test_single_slab_covers_the_grid():
    partition = partition_grid(_grid(10), 1)
    assert partition.starts == (0,)
    assert partition.stops == (11,)


def test_too_many_workers():
    with pytest.raises(TooManyWorkersError):
        partition_grid(_grid(8), 4)


def test_column_owners():
    partition = partition_grid(_grid(16), 4)
    np.testing.assert_array_equal(partition.owner_of_column([0, 3, 4, 15, 16]), [0, 0, 1, 3, 3])


def test_slab_round_trip_is_exact(rng):
    grid = _grid(16)
    partition = partition_grid(grid, 4)
    values = rng.standard_normal(grid.shape)
    slabs = split_field(values, partition)
    np.testing.assert_array_equal(assemble_field(slabs, grid).values, values)


def test_ghost_exchange_copies_neighbour_columns():
    grid = _grid(16)
    partition = partition_grid(grid, 4)
    values = np.repeat(np.arange(grid.shape[0], dtype=float)[:, None], grid.shape[1], axis=1)
    log = MessageLog()
    slabs = exchange_ghosts(split_field(values, partition), partition, log)
    for k in range(1, 4):
        start = partition.starts[k]
        np.testing.assert_array_equal(slabs[k].left_ghost[:, 0], [start - 2, start - 1])
    for k in range(3):
        stop = partition.stops[k]
        np.testing.assert_array_equal(slabs[k].right_ghost[:, 0], [stop, stop + 1])
    assert not slabs[0].left_ghost.any()
    assert log.count(MessageTag.GHOST_EXCHANGE) == 6


def test_constant_field_has_constant_inner_ghosts():
    grid = _grid(12)
    partition = partition_grid(grid, 3)
    slabs = exchange_ghosts(split_field(np.full(grid.shape, 7.0), partition), partition)
    for slab in slabs[1:]:
        np.testing.assert_array_equal(slab.left_ghost, 7.0)
    for slab in slabs[:-1]:
        np.testing.assert_array_equal(slab.right_ghost, 7.0)


def test_ghost_messages_only_between_neighbours():
    log = MessageLog()
    with pytest.raises(InvalidParameterError):
        log.send(MessageTag.GHOST_EXCHANGE, 0, 2, np.zeros(3))
    with pytest.raises(InvalidParameterError):
        log.send(MessageTag.SEPARATOR_HALO, 3, 1, np.zeros(3))
    log.send(MessageTag.GHOST_EXCHANGE, 1, 2, np.zeros(3))
    assert all(abs(r["sender"] - r["receiver"]) == 1 for r in log.transcript())


def test_boundary_scatter_and_gather(unit_circle):
    grid = build_grid(UNIT_BOX, 24, 24)
    partition = partition_grid(grid, 3)
    points = control_points(unit_circle, 40)
    owners = control_owners(points, grid, partition)
    values = np.arange(40, dtype=float)
    log = MessageLog()
    slices = scatter_boundary(values, owners, partition, log)
    for piece in slices:
        np.testing.assert_array_equal(piece.values, values[piece.indices])
    np.testing.assert_array_equal(gather_boundary(slices, log), values)
    assert log.count(MessageTag.BOUNDARY_SCATTER) == 2
    assert log.count(MessageTag.BOUNDARY_GATHER) == 2


def test_transcript_dump(tmp_path):
    log = MessageLog()
    log.begin("ghost-send")
    log.send(MessageTag.GHOST_EXCHANGE, 1, 0, np.zeros((2, 5)))
    path = tmp_path / "transcript.jsonl"
    log.dump(path)
    (line,) = path.read_text().splitlines()
    assert json.loads(line) == {
        "sequence": 1,
        "phase": "ghost-send",
        "tag": "ghost-exchange",
        "sender": 1,
        "receiver": 0,
        "size": 10,
    }


def test_one_worker_matches_serial_solve_bitwise(rng):
    grid = _grid(32)
    rhs = GridField(grid, rng.standard_normal(grid.shape))
    serial = solve_interface_system(rhs, 1.0, make_plan(grid, 1.0))
    distributed = distributed_solve_interface(rhs, 1.0, partition_grid(grid, 1))
    np.testing.assert_array_equal(distributed.values, serial.values)


def test_distributed_eigenfunction():
    grid = _grid(32)
    x, y = grid.mesh()
    v = np.sin(2 * np.pi * x) * np.sin(7 * np.pi * y)
    rhs = GridField(grid, apply_five_point(v, grid.h, 0.0))
    solution = distributed_solve_interface(rhs, 0.0, partition_grid(grid, 4))
    np.testing.assert_allclose(solution.values, v, atol=1e-11)


@pytest.mark.parametrize("workers", [2, 4, 8])
def test_distributed_matches_serial(rng, workers):
    grid = _grid(128)
    rhs = grid.zeros()
    rhs.values[1:-1, 1:-1] = rng.standard_normal((127, 127))
    serial = solve_interface_system(rhs, 0.0, make_plan(grid, 0.0))
    log = MessageLog()
    distributed = distributed_solve_interface(rhs, 0.0, partition_grid(grid, workers), log)
    error = np.linalg.norm(distributed.values - serial.values)
    assert error <= 1e-12 * np.linalg.norm(serial.values)
    assert log.count(MessageTag.SEPARATOR) == 2 * (workers - 1)
    assert log.count(MessageTag.SEPARATOR_HALO) == 2 * (workers - 1)
    assert log.count(MessageTag.GHOST_EXCHANGE) == 0
    assert all(
        abs(r["sender"] - r["receiver"]) == 1
        for r in log.transcript()
        if r["tag"] == MessageTag.SEPARATOR_HALO
    )


@pytest.fixture
def geometry(unit_circle):
    return KfbiGeometry.build(unit_circle, build_grid(UNIT_BOX, 32, 32))


@pytest.mark.parametrize("workers", [2, 4])
def test_distributed_operator_matches_serial(geometry, rng, workers):
    serial = KfbiOperator(geometry, 1.0)
    distributed = DistributedKfbiOperator(geometry, 1.0, workers)
    phi = rng.standard_normal(geometry.points.count)
    field, trace = serial.evaluate(serial.spec(phi=phi))
    other_field, other_trace = distributed.evaluate(distributed.spec(phi=phi))
    np.testing.assert_allclose(other_field.values, field.values, atol=1e-10)
    np.testing.assert_allclose(other_trace.value, trace.value, atol=1e-10)
    np.testing.assert_allclose(other_trace.dx, trace.dx, atol=1e-8)


def test_stencils_stay_within_the_ghost_layer(geometry):
    distributed = DistributedKfbiOperator(geometry, 0.0, 4)
    for local in distributed.locals:
        start, stop = local.columns
        if len(local.control_index):
            assert local.stencils.nodes[..., 0].min() >= start - GHOST_WIDTH
            assert local.stencils.nodes[..., 0].max() < stop + GHOST_WIDTH


def test_distributed_solution_is_worker_invariant(unit_circle):
    grid = build_grid(UNIT_BOX, 32, 32)
    exact = get_exact_solution("harmonic-exp")
    fields = []
    for workers in (1, 2):
        options = SolverOptions.from_settings(workers=workers)
        spec = BvpSpec(
            kappa=0.0,
            bc="dirichlet",
            boundary_data=exact.dirichlet_data,
            boundary=unit_circle,
            grid=grid,
            options=options,
        )
        operator = build_operator(unit_circle, grid, 0.0, options)
        fields.append(solve(spec, operator=operator).field.values)
        if workers > 1:
            assert isinstance(operator, DistributedKfbiOperator)
            assert operator.log.count(MessageTag.BOUNDARY_GATHER) > 0
    np.testing.assert_allclose(fields[1], fields[0], atol=1e-10)


def test_received_payloads_are_released():
    log = MessageLog()
    log.send(MessageTag.GHOST_EXCHANGE, 0, 1, np.ones((2, 4)))
    assert log.pending == 1
    np.testing.assert_array_equal(log.receive_one(1, MessageTag.GHOST_EXCHANGE, 0), 1.0)
    assert log.pending == 0
    assert log.records == [
        {
            "sequence": 0,
            "phase": "",
            "tag": "ghost-exchange",
            "sender": 0,
            "receiver": 1,
            "size": 8,
        }
    ]


def test_operator_log_holds_no_payloads(geometry, rng):
    distributed = DistributedKfbiOperator(geometry, 1.0, 4)
    phi = rng.standard_normal(geometry.points.count)
    for _ in range(3):
        distributed.evaluate(distributed.spec(phi=phi))
    assert distributed.log.pending == 0
    fields = {"sequence", "phase", "tag", "sender", "receiver", "size"}
    assert all(set(record) == fields for record in distributed.log.records)


def test_control_points_belong_to_the_stencil_centre_column(geometry):
    distributed = DistributedKfbiOperator(geometry, 0.0, 4)
    centres = geometry.stencils.nodes[:, 0, 0]
    np.testing.assert_array_equal(
        distributed.owners, distributed.partition.owner_of_column(centres)
    )
