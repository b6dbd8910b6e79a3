import logging
from dataclasses import dataclass

import numpy as np
from django.conf import settings

from .correction import base_rhs, correct_rhs, intersection_frames
from .fast_poisson import make_plan, solve_interface_system
from .geometry import BoundaryFrame, ControlPointSet, discretize_boundary
from .grid import CartesianGrid, IntersectionSet, NodeClassification, classify_nodes, find_intersections
from .interpolation import StencilSelection, one_sided_value, select_stencil
from .jumps import InterfaceSpec, fit_density, jumps_at

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class KfbiGeometry:
    """Everything about boundary and grid that stays fixed across interface solves."""

    boundary: object
    grid: CartesianGrid
    classification: NodeClassification
    intersections: IntersectionSet
    intersection_frame: BoundaryFrame
    points: ControlPointSet
    stencils: StencilSelection

    @classmethod
    def build(cls, boundary, grid, spacing=None):
        if spacing is None:
            spacing = settings.KFBI["CONTROL_SPACING_FACTOR"] * grid.h
        classification = classify_nodes(grid, boundary)
        intersections = find_intersections(grid, classification, boundary)
        points = discretize_boundary(boundary, spacing)
        stencils = select_stencil(grid, classification, points.positions, normals=points.normals)
        logger.info(
            "Prepared %dx%d grid: %d interior nodes, %d intersections, %d control points",
            grid.I,
            grid.J,
            classification.interior_count,
            len(intersections),
            len(points),
        )
        return cls(
            boundary=boundary,
            grid=grid,
            classification=classification,
            intersections=intersections,
            intersection_frame=intersection_frames(boundary, intersections),
            points=points,
            stencils=stencils,
        )

    def control_columns(self):
        """Grid cell column of every control point."""
        return np.floor((self.points.positions[:, 0] - self.grid.x_lo) / self.grid.h).astype(int)


class KfbiOperator:
    """
    Serial evaluation of interface problems on a fixed geometry.

    Every `solve_interface` call is one corrected fast Poisson solve; the
    count is kept for iteration statistics.
    """

    workers = 1

    def __init__(self, geometry, kappa):
        self.geometry = geometry
        self.kappa = float(kappa)
        self.plan = make_plan(geometry.grid, self.kappa)
        self.interface_solves = 0

    @property
    def points(self):
        return self.geometry.points

    def density(self, values):
        return fit_density(self.geometry.points, values)

    def spec(self, phi=None, psi=None, source=None):
        return InterfaceSpec(
            kappa=self.kappa,
            phi=None if phi is None else self.density(phi),
            psi=None if psi is None else self.density(psi),
            source=source,
        )

    def solve_interface(self, spec):
        geometry = self.geometry
        jumps = jumps_at(spec, geometry.intersection_frame)
        rhs = correct_rhs(
            base_rhs(spec, geometry.grid, geometry.classification),
            spec,
            geometry.grid,
            geometry.classification,
            geometry.intersections,
            geometry.boundary,
            jumps=jumps,
        )
        self.interface_solves += 1
        return solve_interface_system(rhs.field, self.kappa, self.plan)

    def trace(self, field, spec):
        """Interior-limit value and gradient at the control points."""
        jumps = jumps_at(spec, self.geometry.points.frame)
        return one_sided_value(field, self.geometry.stencils, jumps)

    def evaluate(self, spec):
        field = self.solve_interface(spec)
        return field, self.trace(field, spec)
