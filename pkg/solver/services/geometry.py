import logging
from dataclasses import dataclass

import numpy as np
from django.conf import settings
from django.db import models
from django.utils.translation import gettext_lazy as _
from scipy.interpolate import CubicHermiteSpline, PchipInterpolator

from core.exceptions import InvalidParameterError, TooCoarseError

logger = logging.getLogger(__name__)

# Points closer than this (relative to the curve size) are on the curve.
ON_CURVE_TOLERANCE = 1e-12

MIN_CONTROL_POINTS = 8


class BoundaryKind(models.TextChoices):
    """Supported closed boundary curves."""

    CIRCLE = "circle", _("Circle")
    ELLIPSE = "ellipse", _("Ellipse")
    STAR = "star", _("Star")


class Side(models.TextChoices):
    """Side of the boundary a point lies on."""

    INTERIOR = "interior", _("Interior")
    EXTERIOR = "exterior", _("Exterior")


SHAPE_PARAMETERS = {
    BoundaryKind.CIRCLE: ("r",),
    BoundaryKind.ELLIPSE: ("ra", "rb"),
    BoundaryKind.STAR: ("r", "c", "m"),
}


@dataclass(frozen=True)
class BoundaryFrame:
    """Points on the curve with their differential frame."""

    s: np.ndarray
    theta: np.ndarray
    point: np.ndarray
    tangent: np.ndarray
    normal: np.ndarray
    curvature: np.ndarray

    def __len__(self):
        return len(self.s)

    def take(self, index):
        return BoundaryFrame(
            s=self.s[index],
            theta=self.theta[index],
            point=self.point[index],
            tangent=self.tangent[index],
            normal=self.normal[index],
            curvature=self.curvature[index],
        )


class ParametricBoundary:
    """
    Closed curve given in polar form about its center.

    The curve is gamma(theta) = center + rho(theta) * (cos(theta + rotation),
    sin(theta + rotation)) traversed counter-clockwise, so the outward normal
    is the tangent rotated by -90 degrees. The parameter t in [0, 1) of the
    public API is theta / (2 pi).
    """

    def __init__(self, kind, params, center=(0.0, 0.0), rotation=0.0, table_size=None):
        self.kind = BoundaryKind(kind)
        self.params = dict(params)
        self.center = np.asarray(center, dtype=float)
        self.rotation = float(rotation)
        self._build_arc_table(table_size or settings.KFBI["ARC_TABLE_SIZE"])

    def __repr__(self):
        shape = ", ".join(f"{k}={v}" for k, v in self.params.items())
        return f"ParametricBoundary({self.kind}, {shape}, center={tuple(self.center)})"

    @property
    def scale(self):
        """Characteristic radius of the curve."""
        if self.kind == BoundaryKind.ELLIPSE:
            return max(self.params["ra"], self.params["rb"])
        return self.params["r"]

    def radius(self, theta):
        """Return rho, d rho / d theta and d2 rho / d theta2."""
        theta = np.asarray(theta, dtype=float)
        if self.kind == BoundaryKind.CIRCLE:
            rho = np.full_like(theta, self.params["r"])
            return rho, np.zeros_like(theta), np.zeros_like(theta)

        if self.kind == BoundaryKind.STAR:
            r, c, m = self.params["r"], self.params["c"], self.params["m"]
            rho = r * (1.0 + c * np.sin(m * theta))
            drho = r * c * m * np.cos(m * theta)
            d2rho = -r * c * m * m * np.sin(m * theta)
            return rho, drho, d2rho

        a, b = self.params["ra"], self.params["rb"]
        q = (b * np.cos(theta)) ** 2 + (a * np.sin(theta)) ** 2
        dq = (a * a - b * b) * np.sin(2.0 * theta)
        d2q = 2.0 * (a * a - b * b) * np.cos(2.0 * theta)
        rho = a * b * q**-0.5
        drho = -0.5 * a * b * q**-1.5 * dq
        d2rho = a * b * (0.75 * q**-2.5 * dq * dq - 0.5 * q**-1.5 * d2q)
        return rho, drho, d2rho

    def _directions(self, theta):
        phase = np.asarray(theta, dtype=float) + self.rotation
        radial = np.stack([np.cos(phase), np.sin(phase)], axis=-1)
        angular = np.stack([-np.sin(phase), np.cos(phase)], axis=-1)
        return radial, angular

    def point_at_theta(self, theta):
        rho, _, _ = self.radius(theta)
        radial, _ = self._directions(theta)
        return self.center + rho[..., None] * radial

    def position(self, t):
        """Position at parameter t in [0, 1]."""
        return self.point_at_theta(2.0 * np.pi * np.asarray(t, dtype=float))

    def speed(self, theta):
        rho, drho, _ = self.radius(theta)
        return np.hypot(rho, drho)

    def _build_arc_table(self, size):
        # Composite Simpson per table interval, doubled until the perimeter settles.
        perimeter = None
        while True:
            theta = np.linspace(0.0, 2.0 * np.pi, size + 1)
            step = theta[1] - theta[0]
            speed = self.speed(theta)
            middle = self.speed(theta[:-1] + 0.5 * step)
            pieces = step / 6.0 * (speed[:-1] + 4.0 * middle + speed[1:])
            arc = np.concatenate([[0.0], np.cumsum(pieces)])
            if perimeter is not None and abs(arc[-1] - perimeter) < 1e-10 * arc[-1]:
                break
            perimeter = arc[-1]
            size *= 2

        self.perimeter = float(arc[-1])
        self.theta_table = theta
        self.arc_table = arc
        self._arc_of_theta = CubicHermiteSpline(theta, arc, speed)
        self._theta_of_arc = PchipInterpolator(arc, theta)
        logger.debug("Arc-length table for %r: %d entries", self, len(arc))

    def arc_length(self, theta):
        """Arc length from theta = 0 to theta (theta wrapped into [0, 2 pi))."""
        theta = np.mod(np.asarray(theta, dtype=float), 2.0 * np.pi)
        return self._arc_of_theta(theta)

    def theta_at(self, s):
        """Invert the arc-length map; s wraps modulo the perimeter."""
        s = np.mod(np.asarray(s, dtype=float), self.perimeter)
        theta = self._theta_of_arc(s)
        for _ in range(2):
            theta = theta - (self._arc_of_theta(theta) - s) / self.speed(theta)
        return theta

    def frame_at_theta(self, theta, s=None):
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        rho, drho, d2rho = self.radius(theta)
        radial, angular = self._directions(theta)
        derivative = drho[..., None] * radial + rho[..., None] * angular
        speed = np.hypot(rho, drho)
        tangent = derivative / speed[..., None]
        normal = np.stack([tangent[..., 1], -tangent[..., 0]], axis=-1)
        curvature = (rho * rho + 2.0 * drho * drho - rho * d2rho) / speed**3
        if s is None:
            s = self.arc_length(theta)
        return BoundaryFrame(
            s=np.atleast_1d(np.asarray(s, dtype=float)),
            theta=theta,
            point=self.center + rho[..., None] * radial,
            tangent=tangent,
            normal=normal,
            curvature=curvature,
        )

    def frame(self, s):
        s = np.mod(np.atleast_1d(np.asarray(s, dtype=float)), self.perimeter)
        return self.frame_at_theta(self.theta_at(s), s=s)

    def angle_of(self, points):
        """Curve parameter theta of the ray through each point."""
        offset = np.asarray(points, dtype=float) - self.center
        angle = np.arctan2(offset[..., 1], offset[..., 0]) - self.rotation
        return np.mod(angle, 2.0 * np.pi)

    def level(self, points):
        """Radial signed distance: negative inside, positive outside."""
        offset = np.asarray(points, dtype=float) - self.center
        rho, _, _ = self.radius(self.angle_of(points))
        return np.hypot(offset[..., 0], offset[..., 1]) - rho

    def inside(self, points):
        return self.level(points) <= ON_CURVE_TOLERANCE * self.scale

    def samples(self, count=4096):
        theta = np.linspace(0.0, 2.0 * np.pi, count, endpoint=False)
        return self.point_at_theta(theta)


@dataclass(frozen=True)
class ControlPointSet:
    """Quasi-uniform control points on the boundary."""

    s: np.ndarray
    theta: np.ndarray
    positions: np.ndarray
    tangents: np.ndarray
    normals: np.ndarray
    curvature: np.ndarray
    perimeter: float

    @property
    def count(self):
        return len(self.s)

    def __len__(self):
        return len(self.s)

    @property
    def gaps(self):
        """Arc gaps between consecutive points, wrap-around gap last."""
        return np.diff(np.append(self.s, self.s[0] + self.perimeter))

    @property
    def frame(self):
        return BoundaryFrame(
            s=self.s,
            theta=self.theta,
            point=self.positions,
            tangent=self.tangents,
            normal=self.normals,
            curvature=self.curvature,
        )


def _positive_integer(value):
    return float(value) > 0 and float(value) == int(float(value))


def build_boundary(kind, params, center=(0.0, 0.0), rotation=0.0):
    """Validate shape parameters and build the boundary with its arc table."""
    try:
        kind = BoundaryKind(kind)
    except ValueError as exc:
        raise InvalidParameterError(f"Unknown boundary kind {kind!r}") from exc

    missing = [name for name in SHAPE_PARAMETERS[kind] if name not in params]
    if missing:
        raise InvalidParameterError(f"{kind} boundary needs parameters {missing}")
    shape = {name: float(params[name]) for name in SHAPE_PARAMETERS[kind]}

    if kind == BoundaryKind.CIRCLE and shape["r"] <= 0:
        raise InvalidParameterError(f"Circle radius must be positive, got {shape['r']}")
    if kind == BoundaryKind.ELLIPSE and (shape["ra"] <= 0 or shape["rb"] <= 0):
        raise InvalidParameterError(
            f"Ellipse semi-axes must be positive, got {shape['ra']}, {shape['rb']}"
        )
    if kind == BoundaryKind.STAR:
        if shape["r"] <= 0:
            raise InvalidParameterError(f"Star radius must be positive, got {shape['r']}")
        if not _positive_integer(shape["m"]):
            raise InvalidParameterError(
                f"Star fold count must be a positive integer, got {shape['m']}"
            )
        shape["m"] = int(shape["m"])
        if shape["c"] <= 0 or shape["c"] >= 1 or shape["c"] * shape["m"] >= 1:
            raise InvalidParameterError(
                f"Star amplitude must satisfy 0 < c and c*m < 1, got c={shape['c']}"
            )

    return ParametricBoundary(kind, shape, center=center, rotation=rotation)


def boundary_frame(boundary, s):
    """Point, unit tangent, outward normal and curvature at arc length s."""
    return boundary.frame(s)


def side_of(boundary, point):
    """Points on the curve count as interior."""
    inside = boundary.inside(np.asarray(point, dtype=float))
    return Side.INTERIOR if bool(inside) else Side.EXTERIOR


def discretize_boundary(boundary, spacing_target):
    """Control points at equal arc-length increments close to spacing_target."""
    if spacing_target <= 0:
        raise InvalidParameterError(f"Spacing must be positive, got {spacing_target}")

    count = int(round(boundary.perimeter / spacing_target))
    if count < MIN_CONTROL_POINTS:
        raise TooCoarseError(
            f"Spacing {spacing_target} gives {count} control points "
            f"(at least {MIN_CONTROL_POINTS} needed)"
        )
    return control_points(boundary, count)


def control_points(boundary, count):
    s = boundary.perimeter * np.arange(count) / count
    frame = boundary.frame(s)
    return ControlPointSet(
        s=frame.s,
        theta=frame.theta,
        positions=frame.point,
        tangents=frame.tangent,
        normals=frame.normal,
        curvature=frame.curvature,
        perimeter=boundary.perimeter,
    )
