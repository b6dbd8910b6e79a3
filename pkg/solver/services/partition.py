"""
In-process slab decomposition of the interface solve.

Workers own contiguous ranges of grid columns (slabs along x) and talk only
through WorkerMessage objects posted to a MessageLog. Every phase runs the
workers concurrently and ends at a barrier; messages posted during a phase
are read in the next one. Worker 0 is the coordinator: it gathers and
scatters boundary data and solves the arrowhead separator system.
"""

import json
import logging
import threading
from collections import defaultdict
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np
from django.db import models
from django.utils.translation import gettext_lazy as _

from core.exceptions import InvalidParameterError, SingularStencilError, TooManyWorkersError

from .arrowhead import balanced_sizes, decompose
from .correction import base_rhs, correct_rhs
from .fast_poisson import fst_forward, fst_inverse, make_plan
from .grid import GridField
from .interpolation import OneSidedTrace, one_sided_value
from .jumps import InterfaceSpec, fit_density, jumps_at

logger = logging.getLogger(__name__)

COORDINATOR = 0
GHOST_WIDTH = 2
MIN_SLAB_COLUMNS = 3


class MessageTag(models.TextChoices):
    GHOST_EXCHANGE = "ghost-exchange", _("Ghost exchange")
    BOUNDARY_GATHER = "boundary-gather", _("Boundary gather")
    BOUNDARY_SCATTER = "boundary-scatter", _("Boundary scatter")
    SEPARATOR = "separator", _("Separator")
    SEPARATOR_HALO = "separator-halo", _("Separator halo")


# Tags that may only travel between neighbouring slabs.
ADJACENT_TAGS = (MessageTag.GHOST_EXCHANGE, MessageTag.SEPARATOR_HALO)


@dataclass(frozen=True, eq=False)
class WorkerMessage:
    tag: str
    sender: int
    receiver: int
    payload: np.ndarray
    phase: str
    sequence: int

    def as_record(self):
        return {
            "sequence": self.sequence,
            "phase": self.phase,
            "tag": str(self.tag),
            "sender": self.sender,
            "receiver": self.receiver,
            "size": int(np.size(self.payload)),
        }


class MessageLog:
    """
    Mailboxes of all workers plus the transcript. Payloads live only in the
    mailboxes until received; the transcript keeps payload-free records.
    """

    def __init__(self):
        self.records = []
        self.phase = ""
        self._sequence = 0
        self._lock = threading.Lock()
        self._inbox = defaultdict(list)

    def begin(self, phase):
        """Barrier: messages posted from now on belong to `phase`."""
        self.phase = phase
        self._sequence += 1

    def send(self, tag, sender, receiver, payload):
        if tag in ADJACENT_TAGS and abs(sender - receiver) != 1:
            raise InvalidParameterError(
                f"{tag} message between non-adjacent workers {sender} and {receiver}"
            )
        message = WorkerMessage(
            tag=tag,
            sender=sender,
            receiver=receiver,
            payload=np.array(payload, copy=True),
            phase=self.phase,
            sequence=self._sequence,
        )
        with self._lock:
            self.records.append(message.as_record())
            self._inbox[(receiver, tag)].append(message)

    def receive(self, receiver, tag, sender=None):
        """Take the waiting messages, ordered by sender."""
        with self._lock:
            waiting = self._inbox.pop((receiver, tag), [])
            wanted = [sender is None or m.sender == sender for m in waiting]
            taken = [m for m, keep in zip(waiting, wanted) if keep]
            left = [m for m, keep in zip(waiting, wanted) if not keep]
            if left:
                self._inbox[(receiver, tag)] = left
        return sorted(taken, key=lambda m: m.sender)

    def receive_one(self, receiver, tag, sender):
        messages = self.receive(receiver, tag, sender)
        if len(messages) != 1:
            raise InvalidParameterError(
                f"Worker {receiver} expected one {tag} message from {sender}, got {len(messages)}"
            )
        return messages[0].payload

    @property
    def pending(self):
        """Number of sent messages nobody has received yet."""
        with self._lock:
            return sum(len(waiting) for waiting in self._inbox.values())

    def transcript(self):
        return sorted(
            self.records, key=lambda r: (r["sequence"], r["tag"], r["sender"], r["receiver"])
        )

    def count(self, tag=None):
        return sum(1 for record in self.records if tag is None or record["tag"] == str(tag))

    def dump(self, path):
        with open(path, "w", encoding="utf-8") as stream:
            for record in self.transcript():
                stream.write(json.dumps(record) + "\n")


@dataclass(frozen=True)
class SlabPartition:
    """
    Node columns [starts[k], stops[k]) belong to worker k.

    Slabs split the I cell columns as evenly as possible; the closing box
    column I goes to the last worker.
    """

    columns: int
    starts: tuple
    stops: tuple
    ghost_width: int = GHOST_WIDTH

    @property
    def count(self):
        return len(self.starts)

    @property
    def widths(self):
        return [stop - start for start, stop in zip(self.starts, self.stops)][:-1] + [
            self.stops[-1] - 1 - self.starts[-1]
        ]

    def owner_of_column(self, column):
        column = np.clip(np.asarray(column), 0, self.columns)
        return np.searchsorted(np.asarray(self.starts), column, side="right") - 1

    def interior_columns(self, worker):
        """Unknown (non-box) node columns owned by `worker`."""
        start = max(self.starts[worker], 1)
        stop = min(self.stops[worker], self.columns)
        return np.arange(start, stop)

    def block_sizes(self):
        """Arrowhead block sizes; the first owned column of workers 1.. is a separator."""
        return [width - 1 for width in self.widths]


def partition_grid(grid, count):
    if count < 1:
        raise InvalidParameterError(f"Worker count must be positive, got {count}")
    widths = balanced_sizes(grid.I, count)
    if min(widths) < MIN_SLAB_COLUMNS:
        raise TooManyWorkersError(
            f"{count} workers on {grid.I} columns leave slabs narrower than {MIN_SLAB_COLUMNS}"
        )
    starts = np.concatenate([[0], np.cumsum(widths)[:-1]]).astype(int)
    stops = np.cumsum(widths).astype(int)
    stops[-1] += 1
    return SlabPartition(columns=grid.I, starts=tuple(starts.tolist()), stops=tuple(stops.tolist()))


@dataclass
class SlabField:
    """Owned node columns of one worker framed by ghost columns on both sides."""

    worker: int
    start: int
    stop: int
    data: np.ndarray

    @property
    def owned(self):
        return self.data[GHOST_WIDTH:-GHOST_WIDTH]

    @property
    def left_ghost(self):
        return self.data[:GHOST_WIDTH]

    @property
    def right_ghost(self):
        return self.data[-GHOST_WIDTH:]

    def columns(self, global_columns):
        local = np.asarray(global_columns) - self.start + GHOST_WIDTH
        if np.any(local < 0) or np.any(local >= len(self.data)):
            raise SingularStencilError(
                f"Worker {self.worker} needs columns outside its ghost layer"
            )
        return local


def split_field(values, partition):
    slabs = []
    for worker, (start, stop) in enumerate(zip(partition.starts, partition.stops)):
        data = np.zeros((stop - start + 2 * GHOST_WIDTH,) + values.shape[1:])
        data[GHOST_WIDTH:-GHOST_WIDTH] = values[start:stop]
        slabs.append(SlabField(worker, start, stop, data))
    return slabs


def assemble_field(slabs, grid):
    values = np.zeros(grid.shape)
    for slab in slabs:
        values[slab.start : slab.stop] = slab.owned
    return GridField(grid, values)


def _run(executor, function, workers):
    return list(executor.map(function, workers))


def exchange_ghosts(slabs, partition, log=None, executor=None):
    """Fill both ghost layers of every slab from its neighbours' owned columns."""
    log = log or MessageLog()
    workers = range(partition.count)
    owns_executor = executor is None
    executor = executor or ThreadPoolExecutor(max_workers=partition.count)
    try:
        log.begin("ghost-send")

        def send(k):
            owned = slabs[k].owned
            if k > 0:
                log.send(MessageTag.GHOST_EXCHANGE, k, k - 1, owned[:GHOST_WIDTH])
            if k < partition.count - 1:
                log.send(MessageTag.GHOST_EXCHANGE, k, k + 1, owned[-GHOST_WIDTH:])

        _run(executor, send, workers)
        log.begin("ghost-receive")

        def receive(k):
            if k > 0:
                slabs[k].left_ghost[...] = log.receive_one(k, MessageTag.GHOST_EXCHANGE, k - 1)
            if k < partition.count - 1:
                slabs[k].right_ghost[...] = log.receive_one(k, MessageTag.GHOST_EXCHANGE, k + 1)

        _run(executor, receive, workers)
    finally:
        if owns_executor:
            executor.shutdown()
    return slabs


@dataclass(frozen=True)
class BoundarySlice:
    worker: int
    indices: np.ndarray
    values: np.ndarray


def control_owners(points, grid, partition, stencils=None):
    """Owner of the column holding each stencil centre, or each point's cell without stencils."""
    if stencils is not None:
        return partition.owner_of_column(stencils.nodes[:, 0, 0])
    columns = np.floor((points.positions[:, 0] - grid.x_lo) / grid.h).astype(int)
    return partition.owner_of_column(columns)


def scatter_boundary(values, owners, partition, log=None):
    """Coordinator sends each worker the values of the control points it owns."""
    log = log or MessageLog()
    values = np.asarray(values, dtype=float)
    slices = []
    for worker in range(partition.count):
        indices = np.flatnonzero(owners == worker)
        if worker != COORDINATOR:
            log.send(MessageTag.BOUNDARY_SCATTER, COORDINATOR, worker, values[indices])
            received = log.receive_one(worker, MessageTag.BOUNDARY_SCATTER, COORDINATOR)
        else:
            received = values[indices].copy()
        slices.append(BoundarySlice(worker, indices, received))
    return slices


def gather_boundary(slices, log=None):
    """Workers send their owned values to the coordinator, which orders them globally."""
    log = log or MessageLog()
    size = sum(len(piece.indices) for piece in slices)
    result = np.empty(size)
    for piece in slices:
        if piece.worker != COORDINATOR:
            log.send(MessageTag.BOUNDARY_GATHER, piece.worker, COORDINATOR, piece.values)
            values = log.receive_one(COORDINATOR, MessageTag.BOUNDARY_GATHER, piece.worker)
        else:
            values = piece.values
        result[piece.indices] = values
    return result


class DistributedInterfaceSolver:
    """
    Fast Poisson solve with the x-direction mode systems split across slabs.

    Block k of every mode system is the set of unknown columns of worker k
    except its first one, which is the separator between blocks k-1 and k.
    """

    def __init__(self, grid, kappa, partition, log=None):
        self.grid = grid
        self.kappa = float(kappa)
        self.partition = partition
        self.log = log or MessageLog()
        self.plan = make_plan(grid, self.kappa)
        system = self.plan.mode_system()
        _, self.arrowhead = decompose(system, partition.count, partition.block_sizes())
        self.arrowhead.precompute_schur()

    def solve(self, slab_rhs, executor):
        """Solve from per-worker right-hand sides (owned node columns) to per-worker slabs."""
        partition, log, arrowhead = self.partition, self.log, self.arrowhead
        last = partition.count - 1
        workers = range(partition.count)

        def interior_rows(k):
            return partition.interior_columns(k) - partition.starts[k]

        log.begin("transform")

        def transform(k):
            return fst_forward(slab_rhs[k][interior_rows(k), 1:-1], axis=1)

        coefficients = _run(executor, transform, workers)

        def split(k):
            # (separator row or None, block rows)
            if k == 0:
                return None, coefficients[k]
            return coefficients[k][0], coefficients[k][1:]

        log.begin("block-solve")

        def block_solve(k):
            z = arrowhead.block_solve(k, split(k)[1])
            if k < last:
                log.send(MessageTag.SEPARATOR_HALO, k, k + 1, z[-1])
            return z

        z = _run(executor, block_solve, workers)
        log.begin("separator-rhs")

        def separator_rhs(k):
            if k == 0:
                return
            left_last = log.receive_one(k, MessageTag.SEPARATOR_HALO, k - 1)
            g = arrowhead.separator_rhs(k - 1, split(k)[0], left_last, z[k][0])
            log.send(MessageTag.SEPARATOR, k, COORDINATOR, g)

        _run(executor, separator_rhs, workers)
        log.begin("separator-solve")
        if last > 0:
            g = np.stack(
                [m.payload for m in log.receive(COORDINATOR, MessageTag.SEPARATOR)]
            )
            h = arrowhead.solve_separators(g)
            for k in range(1, partition.count):
                log.send(MessageTag.SEPARATOR, COORDINATOR, k, h[k - 1])
        log.begin("separator-halo")

        def separator_halo(k):
            if k == 0:
                return None
            own = log.receive_one(k, MessageTag.SEPARATOR, COORDINATOR)
            log.send(MessageTag.SEPARATOR_HALO, k, k - 1, own)
            return own

        separators = _run(executor, separator_halo, workers)
        log.begin("back-substitute")

        def back_substitute(k):
            h_left = separators[k]
            h_right = (
                log.receive_one(k, MessageTag.SEPARATOR_HALO, k + 1) if k < last else None
            )
            s = arrowhead.back_substitute(k, z[k], h_left, h_right)
            modes = s if h_left is None else np.concatenate([h_left[None], s])
            start, stop = partition.starts[k], partition.stops[k]
            data = np.zeros((stop - start + 2 * GHOST_WIDTH, self.grid.J + 1))
            data[GHOST_WIDTH + interior_rows(k), 1:-1] = fst_inverse(modes, axis=1)
            return SlabField(k, start, stop, data)

        return _run(executor, back_substitute, workers)


def distributed_solve_interface(rhs, kappa, partition, log=None):
    """Distributed counterpart of solve_interface_system for a global right-hand side."""
    grid = rhs.grid
    solver = DistributedInterfaceSolver(grid, kappa, partition, log=log)
    slab_rhs = [slab.owned for slab in split_field(rhs.values, partition)]
    with ThreadPoolExecutor(max_workers=partition.count) as executor:
        slabs = solver.solve(slab_rhs, executor)
    return assemble_field(slabs, grid)


@dataclass(frozen=True)
class WorkerGeometry:
    """Intersections and control points that one worker is responsible for."""

    worker: int
    columns: tuple
    intersections: object
    intersection_frame: object
    control_index: np.ndarray
    stencils: object


class DistributedKfbiOperator:
    """
    Drop-in replacement for KfbiOperator running every interface solve on
    `workers` slabs.

    One application scatters the density to the owners, consolidates it on
    every worker (each fits its own spline), corrects and solves slab-wise,
    exchanges ghosts, interpolates at owned control points and gathers the
    traces on the coordinator.
    """

    def __init__(self, geometry, kappa, workers, log=None):
        self.geometry = geometry
        self.kappa = float(kappa)
        self.workers = int(workers)
        self.log = log or MessageLog()
        self.partition = partition_grid(geometry.grid, self.workers)
        self.solver = DistributedInterfaceSolver(geometry.grid, kappa, self.partition, self.log)
        self.owners = control_owners(
            geometry.points, geometry.grid, self.partition, geometry.stencils
        )
        self.locals = [self._worker_geometry(k) for k in range(self.workers)]
        self.interface_solves = 0

    def _worker_geometry(self, k):
        geometry, partition = self.geometry, self.partition
        start, stop = partition.starts[k], partition.stops[k]
        intersections = geometry.intersections
        high_i, _ = intersections.far_end()
        touches = ((intersections.i >= start) & (intersections.i < stop)) | (
            (high_i >= start) & (high_i < stop)
        )
        mine = intersections.subset(touches)
        control_index = np.flatnonzero(self.owners == k)
        stencils = geometry.stencils.take(control_index)
        if len(control_index) and (
            stencils.nodes[..., 0].min() < start - GHOST_WIDTH
            or stencils.nodes[..., 0].max() >= stop + GHOST_WIDTH
        ):
            raise SingularStencilError(f"A stencil of worker {k} reaches past its ghost columns")
        return WorkerGeometry(
            worker=k,
            columns=(start, stop),
            intersections=mine,
            intersection_frame=geometry.boundary.frame_at_theta(mine.theta, s=mine.s),
            control_index=control_index,
            stencils=stencils,
        )

    @property
    def points(self):
        return self.geometry.points

    def density(self, values):
        return fit_density(self.geometry.points, values)

    def _consolidated(self, values):
        """Scatter to owners, then gather and broadcast so every worker holds the full list."""
        if values is None:
            return [None] * self.workers
        slices = scatter_boundary(values, self.owners, self.partition, self.log)
        full = gather_boundary(slices, self.log)
        copies = [full]
        for worker in range(1, self.workers):
            self.log.send(MessageTag.BOUNDARY_SCATTER, COORDINATOR, worker, full)
            copies.append(self.log.receive_one(worker, MessageTag.BOUNDARY_SCATTER, COORDINATOR))
        return copies

    def spec(self, phi=None, psi=None, source=None):
        """Per-worker interface specs built from consolidated densities."""
        self.log.begin("consolidate")
        phis = self._consolidated(phi)
        psis = self._consolidated(psi)
        return [
            InterfaceSpec(
                kappa=self.kappa,
                phi=None if phis[k] is None else self.density(phis[k]),
                psi=None if psis[k] is None else self.density(psis[k]),
                source=source,
            )
            for k in range(self.workers)
        ]

    def _local_spec(self, spec, k):
        return spec[k] if isinstance(spec, list) else spec

    def _solve_slabs(self, spec, executor):
        geometry = self.geometry
        self.log.begin("correction")

        def correct(k):
            local = self.locals[k]
            local_spec = self._local_spec(spec, k)
            start, stop = local.columns
            rhs = correct_rhs(
                base_rhs(local_spec, geometry.grid, geometry.classification),
                local_spec,
                geometry.grid,
                geometry.classification,
                local.intersections,
                geometry.boundary,
                jumps=jumps_at(local_spec, local.intersection_frame),
                columns=(start, stop),
            )
            return rhs.values[start:stop]

        slab_rhs = _run(executor, correct, range(self.workers))
        slabs = self.solver.solve(slab_rhs, executor)
        self.interface_solves += 1
        return exchange_ghosts(slabs, self.partition, self.log, executor)

    def _trace_slabs(self, slabs, spec, executor):
        geometry = self.geometry
        self.log.begin("interpolate")

        def interpolate(k):
            local = self.locals[k]
            if not len(local.control_index):
                return None
            local_spec = self._local_spec(spec, k)
            jumps = jumps_at(local_spec, geometry.points.frame.take(local.control_index))
            stencils = local.stencils
            local_nodes = stencils.nodes.copy()
            local_nodes[..., 0] = slabs[k].columns(stencils.nodes[..., 0])
            samples = slabs[k].data[local_nodes[..., 0], local_nodes[..., 1]]
            return one_sided_value(None, stencils, jumps, samples=samples)

        traces = _run(executor, interpolate, range(self.workers))
        self.log.begin("gather")
        gathered = {}
        for name in ("value", "dx", "dy", "dxx", "dxy", "dyy"):
            slices = [
                BoundarySlice(
                    k,
                    self.locals[k].control_index,
                    np.zeros(0) if traces[k] is None else getattr(traces[k], name),
                )
                for k in range(self.workers)
            ]
            gathered[name] = gather_boundary(slices, self.log)
        return OneSidedTrace(**gathered)

    def solve_interface(self, spec):
        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            slabs = self._solve_slabs(spec, executor)
        return assemble_field(slabs, self.geometry.grid)

    def trace(self, field, spec):
        slabs = split_field(field.values, self.partition)
        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            slabs = exchange_ghosts(slabs, self.partition, self.log, executor)
            return self._trace_slabs(slabs, spec, executor)

    def evaluate(self, spec):
        with ThreadPoolExecutor(max_workers=self.workers) as executor:
            slabs = self._solve_slabs(spec, executor)
            trace = self._trace_slabs(slabs, spec, executor)
        return assemble_field(slabs, self.geometry.grid), trace
