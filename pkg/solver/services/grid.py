import logging
from dataclasses import dataclass

import numpy as np
from django.conf import settings
from django.db import models
from django.utils.translation import gettext_lazy as _

from core.exceptions import (
    AnisotropicGridError,
    BoundaryEscapesBoxError,
    InvalidParameterError,
    ResolutionError,
    RootNotFoundError,
)

logger = logging.getLogger(__name__)

SPACING_TOLERANCE = 1e-12
BISECTION_STEPS = 45
# Recorded roots are kept this far (relative to h) from the edge endpoints.
ENDPOINT_NUDGE = 1e-12


class Orientation(models.IntegerChoices):
    X_EDGE = 0, _("x-edge")
    Y_EDGE = 1, _("y-edge")


@dataclass(frozen=True)
class CartesianGrid:
    """Uniform node grid on the box [x_lo, x_hi] x [y_lo, y_hi]."""

    x_lo: float
    x_hi: float
    y_lo: float
    y_hi: float
    I: int  # noqa: E741
    J: int
    h: float

    @property
    def box(self):
        return (self.x_lo, self.x_hi, self.y_lo, self.y_hi)

    @property
    def shape(self):
        return (self.I + 1, self.J + 1)

    @property
    def x(self):
        return self.x_lo + self.h * np.arange(self.I + 1)

    @property
    def y(self):
        return self.y_lo + self.h * np.arange(self.J + 1)

    def mesh(self):
        return np.meshgrid(self.x, self.y, indexing="ij")

    def nodes(self):
        """Node coordinates, shape (I+1, J+1, 2)."""
        return np.stack(self.mesh(), axis=-1)

    def node(self, i, j):
        return np.array([self.x_lo + i * self.h, self.y_lo + j * self.h])

    def zeros(self):
        return GridField(self, np.zeros(self.shape))


@dataclass
class GridField:
    """Nodal values on a grid, indexed [i, j]."""

    grid: CartesianGrid
    values: np.ndarray

    def __post_init__(self):
        if self.values.shape != self.grid.shape:
            raise InvalidParameterError(
                f"Field shape {self.values.shape} does not match grid {self.grid.shape}"
            )

    @property
    def interior(self):
        return self.values[1:-1, 1:-1]

    def __add__(self, other):
        return GridField(self.grid, self.values + other.values)

    def __sub__(self, other):
        return GridField(self.grid, self.values - other.values)

    def scaled(self, factor):
        return GridField(self.grid, factor * self.values)

    def copy(self):
        return GridField(self.grid, self.values.copy())


@dataclass(frozen=True)
class NodeClassification:
    inside: np.ndarray
    irregular: np.ndarray

    @property
    def interior_count(self):
        return int(self.inside.sum())

    @property
    def irregular_count(self):
        return int(self.irregular.sum())

    def side_label(self, i, j):
        return "interior" if self.inside[i, j] else "exterior"

    def rows(self):
        """(i, j, side, irregular) per node, row-major."""
        I1, J1 = self.inside.shape
        for i in range(I1):
            for j in range(J1):
                yield i, j, self.side_label(i, j), bool(self.irregular[i, j])


@dataclass(frozen=True)
class IntersectionSet:
    """Crossings of the boundary with grid edges, sorted by edge."""

    orientation: np.ndarray
    i: np.ndarray
    j: np.ndarray
    position: np.ndarray
    theta: np.ndarray
    s: np.ndarray

    def __len__(self):
        return len(self.s)

    @property
    def x_edges(self):
        return self.orientation == Orientation.X_EDGE

    @property
    def y_edges(self):
        return self.orientation == Orientation.Y_EDGE

    def far_end(self):
        """Index of the high-end node of each crossed edge."""
        return (
            self.i + (self.orientation == Orientation.X_EDGE),
            self.j + (self.orientation == Orientation.Y_EDGE),
        )

    def subset(self, mask):
        return IntersectionSet(
            orientation=self.orientation[mask],
            i=self.i[mask],
            j=self.j[mask],
            position=self.position[mask],
            theta=self.theta[mask],
            s=self.s[mask],
        )


def build_grid(box, I, J):  # noqa: E741
    x_lo, x_hi, y_lo, y_hi = (float(v) for v in box)
    if x_hi <= x_lo or y_hi <= y_lo:
        raise InvalidParameterError(f"Box {box} is empty")
    if I < 2 or J < 2:
        raise InvalidParameterError(f"Grid needs at least 2 cells per side, got {I}x{J}")

    hx = (x_hi - x_lo) / I
    hy = (y_hi - y_lo) / J
    if abs(hx - hy) > SPACING_TOLERANCE:
        raise AnisotropicGridError(f"Grid spacing differs: hx={hx}, hy={hy}")

    grid = CartesianGrid(x_lo, x_hi, y_lo, y_hi, int(I), int(J), hx)
    logger.debug("Built %dx%d grid on %s with h=%g", I, J, box, hx)
    return grid


def classify_nodes(grid, boundary):
    samples = boundary.samples()
    x_lo, x_hi, y_lo, y_hi = grid.box
    clearance = np.min(
        np.stack(
            [
                samples[:, 0] - x_lo,
                x_hi - samples[:, 0],
                samples[:, 1] - y_lo,
                y_hi - samples[:, 1],
            ]
        )
    )
    if clearance <= 0:
        raise BoundaryEscapesBoxError(f"{boundary!r} leaves the box {grid.box}")

    factor = settings.KFBI["CLEARANCE_WARNING_FACTOR"]
    if clearance < factor * grid.h:
        logger.warning(
            "Boundary is %.3g from the box edge (less than %gh); corrections may be inaccurate",
            clearance,
            factor,
        )

    inside = boundary.inside(grid.nodes())
    flip_x = inside[1:, :] != inside[:-1, :]
    flip_y = inside[:, 1:] != inside[:, :-1]
    irregular = np.zeros_like(inside)
    irregular[1:, :] |= flip_x
    irregular[:-1, :] |= flip_x
    irregular[:, 1:] |= flip_y
    irregular[:, :-1] |= flip_y

    classification = NodeClassification(inside=inside, irregular=irregular)
    logger.debug(
        "%d interior nodes, %d irregular nodes",
        classification.interior_count,
        classification.irregular_count,
    )
    return classification


def _edge_samples(boundary, start, step, fractions):
    points = start[:, None, :] + fractions[None, :, None] * step[None, None, :]
    return boundary.inside(points)


def _check_single_crossing(boundary, start, step, crossed, orientation_label):
    # Midpoint and quarter points catch edges the curve enters and leaves.
    fractions = np.array([0.0, 0.25, 0.5, 0.75, 1.0])
    sides = _edge_samples(boundary, start, step, fractions)
    changes = np.count_nonzero(sides[:, 1:] != sides[:, :-1], axis=1)
    bad = np.flatnonzero(changes != crossed.astype(int))
    if bad.size:
        raise ResolutionError(
            f"{bad.size} {orientation_label} are crossed more than once by the boundary; "
            f"first at {tuple(start[bad[0]])}; refine the grid"
        )


def _bisect(boundary, start, step, start_inside, h):
    inner = np.where(start_inside, 0.0, 1.0)
    outer = 1.0 - inner
    for _ in range(BISECTION_STEPS):
        middle = 0.5 * (inner + outer)
        middle_inside = boundary.inside(start + middle[:, None] * step)
        inner = np.where(middle_inside, middle, inner)
        outer = np.where(middle_inside, outer, middle)

    fraction = np.clip(0.5 * (inner + outer), ENDPOINT_NUDGE, 1.0 - ENDPOINT_NUDGE)
    position = start + fraction[:, None] * step
    residual = np.abs(boundary.level(position))
    missed = residual > 1e-8 * max(h, 1.0)
    if np.any(missed):
        raise RootNotFoundError(f"Bisection did not converge on {int(missed.sum())} edges")
    return position


def _edges(grid, classification, orientation):
    inside = classification.inside
    if orientation == Orientation.X_EDGE:
        crossed = inside[:-1, :] != inside[1:, :]
        step = np.array([grid.h, 0.0])
    else:
        crossed = inside[:, :-1] != inside[:, 1:]
        step = np.array([0.0, grid.h])
    ii, jj = np.nonzero(np.ones_like(crossed))
    return ii, jj, crossed.ravel(), step


def find_intersections(grid, classification, boundary):
    pieces = []
    for orientation in (Orientation.X_EDGE, Orientation.Y_EDGE):
        ii, jj, crossed, step = _edges(grid, classification, orientation)
        start = np.stack([grid.x[ii], grid.y[jj]], axis=-1)
        _check_single_crossing(boundary, start, step, crossed, f"{orientation.label}s")

        ii, jj, start = ii[crossed], jj[crossed], start[crossed]
        position = _bisect(boundary, start, step, classification.inside[ii, jj], grid.h)
        pieces.append((np.full(len(ii), orientation.value), ii, jj, position))

    orientation = np.concatenate([p[0] for p in pieces])
    position = np.concatenate([p[3] for p in pieces]).reshape(-1, 2)
    theta = boundary.angle_of(position)
    intersections = IntersectionSet(
        orientation=orientation,
        i=np.concatenate([p[1] for p in pieces]),
        j=np.concatenate([p[2] for p in pieces]),
        position=position,
        theta=theta,
        s=boundary.arc_length(theta),
    )
    logger.debug(
        "%d intersections (%d x-edges, %d y-edges)",
        len(intersections),
        int(intersections.x_edges.sum()),
        int(intersections.y_edges.sum()),
    )
    return intersections
