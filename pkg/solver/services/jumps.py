"""
Boundary densities, source terms and the jump relations of the interface problem.

The interface problem is

    Laplace(v) - kappa v = F   in B minus the boundary,
    [v] = Phi,  [dv/dn] = Psi  on the boundary,
    v = 0                      on the box,

where [.] is the interior limit minus the exterior limit and n is the outward
normal. Differentiating [v] = Phi and [dv/dn] = Psi along the curve and using
the equation itself gives all six Cartesian jumps up to second order.
"""

import logging
from dataclasses import dataclass

import numpy as np
from django.db import models
from django.utils.translation import gettext_lazy as _
from scipy.interpolate import CubicSpline

from core.exceptions import InvalidParameterError, LengthMismatchError, SingularSystemError

logger = logging.getLogger(__name__)

SINGULAR_DETERMINANT = 1e-12


class InterfaceCase(models.TextChoices):
    DOUBLE_LAYER = "double-layer", _("Double layer")
    SINGLE_LAYER = "single-layer", _("Single layer")
    VOLUME = "volume", _("Volume")


class DensityField:
    """Periodic cubic spline through values at the control points, over arc length."""

    def __init__(self, points, values):
        values = np.asarray(values, dtype=float)
        if values.shape != (points.count,):
            raise LengthMismatchError(
                f"Expected {points.count} density values, got shape {values.shape}"
            )
        self.points = points
        self.values = values
        self.perimeter = points.perimeter
        knots = np.append(points.s, points.perimeter)
        self._spline = CubicSpline(knots, np.append(values, values[0]), bc_type="periodic")

    def __len__(self):
        return len(self.values)

    def _wrap(self, s):
        return np.mod(np.asarray(s, dtype=float), self.perimeter)

    def value(self, s):
        return self._spline(self._wrap(s))

    def first(self, s):
        return self._spline(self._wrap(s), 1)

    def second(self, s):
        return self._spline(self._wrap(s), 2)


def fit_density(points, values):
    return DensityField(points, values)


class FunctionSource:
    """Source term given as a callable f(x, y)."""

    def __init__(self, function):
        self.function = function

    def nodal(self, grid):
        x, y = grid.mesh()
        return np.broadcast_to(self.function(x, y), grid.shape).astype(float)

    def trace(self, points, s):
        points = np.asarray(points, dtype=float)
        values = self.function(points[..., 0], points[..., 1])
        return np.broadcast_to(values, points.shape[:-1]).astype(float)


class SampledSource:
    """Source term known only at grid nodes, with a separately carried boundary trace."""

    def __init__(self, values, trace):
        self.values = np.asarray(values, dtype=float)
        self.trace_density = trace

    def nodal(self, grid):
        if self.values.shape != grid.shape:
            raise LengthMismatchError(
                f"Sampled source has shape {self.values.shape}, grid is {grid.shape}"
            )
        return self.values

    def trace(self, points, s):
        return self.trace_density.value(s)


@dataclass(frozen=True)
class InterfaceSpec:
    """Data of one interface problem; any of the three ingredients may be absent."""

    kappa: float
    phi: DensityField | None = None
    psi: DensityField | None = None
    source: FunctionSource | SampledSource | None = None

    def __post_init__(self):
        if self.kappa < 0:
            raise InvalidParameterError(f"kappa must be non-negative, got {self.kappa}")

    @classmethod
    def double_layer(cls, phi, kappa):
        return cls(kappa=kappa, phi=phi)

    @classmethod
    def single_layer(cls, psi, kappa):
        return cls(kappa=kappa, psi=psi)

    @classmethod
    def volume(cls, source, kappa):
        return cls(kappa=kappa, source=source)

    @property
    def case(self):
        present = [
            case
            for case, part in (
                (InterfaceCase.DOUBLE_LAYER, self.phi),
                (InterfaceCase.SINGLE_LAYER, self.psi),
                (InterfaceCase.VOLUME, self.source),
            )
            if part is not None
        ]
        return present[0] if len(present) == 1 else None

    def combine(self, other):
        """Superpose two interface problems with the same kappa."""
        if other.kappa != self.kappa:
            raise InvalidParameterError("Cannot combine interface problems with different kappa")
        parts = {}
        for name in ("phi", "psi", "source"):
            mine, theirs = getattr(self, name), getattr(other, name)
            if mine is not None and theirs is not None:
                raise InvalidParameterError(f"Both problems carry a {name} term")
            parts[name] = mine if mine is not None else theirs
        return InterfaceSpec(kappa=self.kappa, **parts)

    def phi_derivatives(self, s):
        if self.phi is None:
            zero = np.zeros_like(s, dtype=float)
            return zero, zero, zero
        return self.phi.value(s), self.phi.first(s), self.phi.second(s)

    def psi_derivatives(self, s):
        if self.psi is None:
            zero = np.zeros_like(s, dtype=float)
            return zero, zero
        return self.psi.value(s), self.psi.first(s)

    def source_jump(self, frame):
        if self.source is None:
            return np.zeros_like(frame.s, dtype=float)
        return self.source.trace(frame.point, frame.s)


@dataclass(frozen=True)
class JumpData:
    """Jumps of v and its first and second Cartesian derivatives."""

    v: np.ndarray
    vx: np.ndarray
    vy: np.ndarray
    vxx: np.ndarray
    vxy: np.ndarray
    vyy: np.ndarray

    FIELDS = ("v", "vx", "vy", "vxx", "vxy", "vyy")

    def __len__(self):
        return len(self.v)

    def __add__(self, other):
        return JumpData(*(getattr(self, f) + getattr(other, f) for f in self.FIELDS))

    def __getitem__(self, index):
        return JumpData(*(getattr(self, f)[index] for f in self.FIELDS))

    @classmethod
    def zeros(cls, count):
        return cls(*(np.zeros(count) for _ in cls.FIELDS))

    def taylor(self, dx, dy):
        """Jump polynomial at offsets (dx, dy) from the expansion point."""
        return (
            self.v
            + self.vx * dx
            + self.vy * dy
            + 0.5 * self.vxx * dx * dx
            + self.vxy * dx * dy
            + 0.5 * self.vyy * dy * dy
        )

    def along(self, orientation, d):
        """Jump polynomial along a grid edge; orientation 0 is x, 1 is y."""
        first = np.where(orientation == 0, self.vx, self.vy)
        second = np.where(orientation == 0, self.vxx, self.vyy)
        return self.v + first * d + 0.5 * second * d * d

    def normal_jump(self, normal):
        return normal[..., 0] * self.vx + normal[..., 1] * self.vy


def _solve_stacked(matrices, rhs, label):
    determinant = np.linalg.det(matrices)
    if np.any(np.abs(determinant) < SINGULAR_DETERMINANT):
        raise SingularSystemError(f"{label} jump system is singular; the boundary frame is corrupt")
    return np.linalg.solve(matrices, rhs[..., None])[..., 0]


def jumps_at(spec, frame):
    """Six Cartesian jumps of the interface solution at the frame points."""
    s = frame.s
    phi, dphi, d2phi = spec.phi_derivatives(s)
    psi, dpsi = spec.psi_derivatives(s)
    source_jump = spec.source_jump(frame)

    t1, t2 = frame.tangent[..., 0], frame.tangent[..., 1]
    # The tangent turns as dt/ds = -curvature * n with n = (t2, -t1).
    dt1 = -frame.curvature * t2
    dt2 = frame.curvature * t1

    first_matrix = np.stack(
        [np.stack([t1, t2], axis=-1), np.stack([t2, -t1], axis=-1)], axis=-2
    )
    vx, vy = np.moveaxis(
        _solve_stacked(first_matrix, np.stack([dphi, psi], axis=-1), "First-order"), -1, 0
    )

    second_matrix = np.stack(
        [
            np.stack([t1 * t1, 2.0 * t1 * t2, t2 * t2], axis=-1),
            np.stack([t1 * t2, t2 * t2 - t1 * t1, -t1 * t2], axis=-1),
            np.stack([np.ones_like(t1), np.zeros_like(t1), np.ones_like(t1)], axis=-1),
        ],
        axis=-2,
    )
    second_rhs = np.stack(
        [
            d2phi - (dt1 * vx + dt2 * vy),
            dpsi - (dt2 * vx - dt1 * vy),
            source_jump + spec.kappa * phi,
        ],
        axis=-1,
    )
    vxx, vxy, vyy = np.moveaxis(_solve_stacked(second_matrix, second_rhs, "Second-order"), -1, 0)
    return JumpData(v=np.asarray(phi, dtype=float), vx=vx, vy=vy, vxx=vxx, vxy=vxy, vyy=vyy)
