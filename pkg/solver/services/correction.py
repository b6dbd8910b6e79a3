import logging
from dataclasses import dataclass

import numpy as np

from core.exceptions import MissingJumpError

from .grid import GridField, Orientation
from .jumps import jumps_at

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CorrectedRhs:
    """
    Corrected right-hand side of the five-point scheme.

    `nodes`, `intersection` and `contribution` are parallel arrays: one entry
    per (node, crossed edge) pair, the edge being identified by the index of
    its intersection.
    """

    field: GridField
    nodes: np.ndarray
    intersection: np.ndarray
    contribution: np.ndarray

    @property
    def values(self):
        return self.field.values

    @property
    def grid(self):
        return self.field.grid


def base_rhs(spec, grid, classification):
    """Zero extension of the source term; zero for pure layer problems."""
    if spec.source is None:
        return grid.zeros()
    values = np.where(classification.inside, spec.source.nodal(grid), 0.0)
    return GridField(grid, values)


def intersection_frames(boundary, intersections):
    return boundary.frame_at_theta(intersections.theta, s=intersections.s)


def correct_rhs(
    base, spec, grid, classification, intersections, boundary, jumps=None, columns=None
):
    """
    Add the jump Taylor terms at irregular nodes.

    A node whose stencil reaches across the boundary sees the other side's
    value; adding the jump polynomial at that neighbour's offset from the
    crossing turns it into the value of this node's own side. `columns`
    restricts the corrected nodes to a half-open range of i indices.
    """
    if jumps is None:
        jumps = jumps_at(spec, intersection_frames(boundary, intersections))
    if len(jumps) != len(intersections):
        raise MissingJumpError(
            f"{len(intersections)} intersections but jump data for {len(jumps)}"
        )

    is_x = intersections.orientation == Orientation.X_EDGE
    low_i, low_j = intersections.i, intersections.j
    high_i, high_j = intersections.far_end()
    crossing = np.where(is_x, intersections.position[:, 0], intersections.position[:, 1])
    low_coord = np.where(is_x, grid.x[low_i], grid.y[low_j])
    high_coord = low_coord + grid.h

    # Each node of the edge is corrected with the polynomial at its neighbour.
    node_i = np.concatenate([low_i, high_i])
    node_j = np.concatenate([low_j, high_j])
    offset = np.concatenate([high_coord - crossing, low_coord - crossing])
    index = np.concatenate([np.arange(len(intersections))] * 2)

    orientation = intersections.orientation[index]
    polynomial = jumps[index].along(orientation, offset)
    sign = np.where(classification.inside[node_i, node_j], -1.0, 1.0)
    contribution = sign * polynomial / grid.h**2

    keep = (node_i > 0) & (node_i < grid.I) & (node_j > 0) & (node_j < grid.J)
    if columns is not None:
        keep &= (node_i >= columns[0]) & (node_i < columns[1])
    node_i, node_j = node_i[keep], node_j[keep]
    index, contribution = index[keep], contribution[keep]

    values = base.values.copy()
    np.add.at(values, (node_i, node_j), contribution)
    logger.debug("Corrected %d node equations", len(np.unique(node_i * (grid.J + 1) + node_j)))
    return CorrectedRhs(
        field=GridField(grid, values),
        nodes=np.stack([node_i, node_j], axis=-1),
        intersection=index,
        contribution=contribution,
    )
