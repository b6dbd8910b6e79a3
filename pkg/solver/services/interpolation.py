import logging
from dataclasses import dataclass

import numpy as np

from core.exceptions import NearBoxError, SingularStencilError

from .geometry import Side

logger = logging.getLogger(__name__)

CONDITION_LIMIT = 1e8

# Five-point cross; the sixth node is the diagonal corner facing the point.
CROSS = np.array([[0, 0], [1, 0], [-1, 0], [0, 1], [0, -1]])


@dataclass(frozen=True)
class StencilSelection:
    """Six-node quadratic stencils for a batch of boundary points."""

    index: np.ndarray
    points: np.ndarray
    nodes: np.ndarray
    inside: np.ndarray
    offsets: np.ndarray
    h: float

    def __len__(self):
        return len(self.index)

    @property
    def matrix(self):
        """Rows (1, x, y, x^2/2, xy, y^2/2) of the offsets in units of h."""
        x = self.offsets[..., 0] / self.h
        y = self.offsets[..., 1] / self.h
        return np.stack([np.ones_like(x), x, y, 0.5 * x * x, x * y, 0.5 * y * y], axis=-1)

    @property
    def condition(self):
        return np.linalg.cond(self.matrix)

    def take(self, index):
        return StencilSelection(
            index=self.index[index],
            points=self.points[index],
            nodes=self.nodes[index],
            inside=self.inside[index],
            offsets=self.offsets[index],
            h=self.h,
        )


@dataclass(frozen=True)
class OneSidedTrace:
    value: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    dxx: np.ndarray
    dxy: np.ndarray
    dyy: np.ndarray

    def normal_derivative(self, normals):
        return normals[..., 0] * self.dx + normals[..., 1] * self.dy


def _centers(grid, points):
    """Node nearest each point."""
    scaled = (points - np.array([grid.x_lo, grid.y_lo])) / grid.h
    cell = np.floor(scaled).astype(int)
    return cell + (scaled - cell >= 0.5)


def _inward_step(normals):
    """One node against the outward normal along its dominant axis."""
    dominant = np.abs(normals[:, 0]) >= np.abs(normals[:, 1])
    step = np.zeros((len(normals), 2), dtype=int)
    step[:, 0] = np.where(dominant, -np.sign(normals[:, 0]), 0)
    step[:, 1] = np.where(dominant, 0, -np.sign(normals[:, 1]))
    return step


def _stencil_nodes(grid, points, shift):
    center = _centers(grid, points) + shift
    scaled = (points - np.array([grid.x_lo, grid.y_lo])) / grid.h
    corner = np.where(scaled >= center, 1, -1)
    nodes = np.concatenate(
        [center[:, None, :] + CROSS[None, :, :], (center + corner)[:, None, :]], axis=1
    )
    return nodes


def _check_on_grid(grid, nodes):
    if nodes.min() < 0 or np.any(nodes[..., 0] > grid.I) or np.any(nodes[..., 1] > grid.J):
        raise SingularStencilError("Stencil leaves the grid")


def select_stencil(grid, classification, points, normals=None, index=None):
    """
    Pick the cross around the node nearest each point plus the diagonal corner
    facing the point. With `normals`, a cross whose centre lies outside is
    moved one node towards the interior, and ill-conditioned stencils are
    moved one node further once.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if index is None:
        index = np.arange(len(points))
    clearance = np.min(
        np.stack(
            [
                points[:, 0] - grid.x_lo,
                grid.x_hi - points[:, 0],
                points[:, 1] - grid.y_lo,
                grid.y_hi - points[:, 1],
            ]
        ),
        axis=0,
    )
    near = clearance < 2.0 * grid.h
    if np.any(near):
        raise NearBoxError(
            f"Point {tuple(points[near][0])} is closer than 2h to the box boundary"
        )

    shift = np.zeros((len(points), 2), dtype=int)
    if normals is not None:
        normals = np.atleast_2d(np.asarray(normals, dtype=float))
        center = _centers(grid, points)
        outside = ~classification.inside[center[:, 0], center[:, 1]]
        shift[outside] = _inward_step(normals[outside])
    nodes = _stencil_nodes(grid, points, shift)
    _check_on_grid(grid, nodes)
    selection = _selection(grid, classification, points, nodes, index)

    bad = np.flatnonzero(selection.condition > CONDITION_LIMIT)
    if bad.size:
        if normals is None:
            raise SingularStencilError(f"{bad.size} stencils are ill-conditioned")
        shift[bad] += _inward_step(normals[bad])
        nodes = _stencil_nodes(grid, points, shift)
        _check_on_grid(grid, nodes)
        selection = _selection(grid, classification, points, nodes, index)
        if np.any(selection.condition[bad] > CONDITION_LIMIT):
            raise SingularStencilError("Stencil stays ill-conditioned after reselection")
        logger.debug("Reselected %d stencils", bad.size)
    return selection


def _selection(grid, classification, points, nodes, index):
    coordinates = np.stack([grid.x[nodes[..., 0]], grid.y[nodes[..., 1]]], axis=-1)
    return StencilSelection(
        index=np.asarray(index),
        points=points,
        nodes=nodes,
        inside=classification.inside[nodes[..., 0], nodes[..., 1]],
        offsets=coordinates - points[:, None, :],
        h=grid.h,
    )


def _trace(coefficients, h):
    return OneSidedTrace(
        value=coefficients[:, 0],
        dx=coefficients[:, 1] / h,
        dy=coefficients[:, 2] / h,
        dxx=coefficients[:, 3] / h**2,
        dxy=coefficients[:, 4] / h**2,
        dyy=coefficients[:, 5] / h**2,
    )


def _solve(selection, samples):
    try:
        coefficients = np.linalg.solve(selection.matrix, samples[..., None])[..., 0]
    except np.linalg.LinAlgError as exc:
        raise SingularStencilError("Singular six-point stencil") from exc
    return _trace(coefficients, selection.h)


def interior_fit(values, inside, grid, points):
    """
    Least-squares quadratic through the `inside` nodes of the 5x5 block around
    the node nearest each point. Extrapolates a grid function that only has
    meaningful values on one side of the boundary.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    span = np.arange(-2, 3)
    block = np.stack(np.meshgrid(span, span, indexing="ij"), axis=-1).reshape(-1, 2)
    center = np.clip(_centers(grid, points), [2, 2], [grid.I - 2, grid.J - 2])
    nodes = center[:, None, :] + block[None, :, :]
    used = inside[nodes[..., 0], nodes[..., 1]]
    if np.any(used.sum(axis=1) < 6):
        raise SingularStencilError("Fewer than six interior nodes near a boundary point")

    x = (grid.x[nodes[..., 0]] - points[:, 0, None]) / grid.h
    y = (grid.y[nodes[..., 1]] - points[:, 1, None]) / grid.h
    matrix = np.stack([np.ones_like(x), x, y, 0.5 * x * x, x * y, 0.5 * y * y], axis=-1)
    matrix = np.where(used[..., None], matrix, 0.0)

    samples = values[nodes[..., 0], nodes[..., 1]]
    first = np.argmax(used, axis=1)[:, None]
    reference = np.take_along_axis(samples, first, axis=1)
    samples = np.where(used, samples - reference, 0.0)
    coefficients = np.einsum("pij,pj->pi", np.linalg.pinv(matrix), samples)
    coefficients[:, 0] += reference[:, 0]
    return _trace(coefficients, grid.h)


def node_samples(values, selection):
    return values[selection.nodes[..., 0], selection.nodes[..., 1]]


def one_sided_value(field, selection, jumps, side=Side.INTERIOR, samples=None):
    """
    Quadratic fit through the six nodes after moving every sample to `side`.

    Nodes on the other side get the jump polynomial (taken at the point's
    own jumps) added for the interior limit or subtracted for the exterior one.
    `samples` overrides the values read from `field`.
    """
    if samples is None:
        samples = node_samples(field.values, selection)
    per_point = type(jumps)(*(np.asarray(getattr(jumps, name))[:, None] for name in jumps.FIELDS))
    shift = per_point.taylor(selection.offsets[..., 0], selection.offsets[..., 1])
    if side == Side.INTERIOR:
        samples = samples + np.where(selection.inside, 0.0, shift)
    else:
        samples = samples - np.where(selection.inside, shift, 0.0)
    return _solve(selection, samples)


def one_sided_normal_derivative(field, selection, jumps, normals, side=Side.INTERIOR):
    trace = one_sided_value(field, selection, jumps, side=side)
    return trace.normal_derivative(np.atleast_2d(normals))
