"""
Second-kind boundary integral equations solved kernel-free.

Dirichlet:  K_D phi = g_D - (Yf)^+      with K_D phi = (1/2) phi + W phi,
Neumann:    K_N psi = g_N - dn (Yf)^+   with K_N psi = (1/2) psi - dn S psi.

Each application of K_D or K_N is one interface solve followed by one-sided
interpolation at the control points; no Green's function is ever evaluated.
"""

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from django.conf import settings
from django.db import models
from django.utils.translation import gettext_lazy as _

from core.exceptions import (
    ConvergenceError,
    IncompatibleDataError,
    InvalidParameterError,
    UnsupportedProblemError,
)

from .grid import GridField
from .operators import KfbiGeometry, KfbiOperator
from .partition import DistributedKfbiOperator

logger = logging.getLogger(__name__)

BREAKDOWN_TOLERANCE = 1e-14
COMPATIBILITY_TOLERANCE = 1e-8


class Scheme(models.TextChoices):
    GMRES = "gmres", _("Restarted GMRES")
    RICHARDSON = "richardson", _("Richardson")


class BoundaryCondition(models.TextChoices):
    DIRICHLET = "dirichlet", _("Dirichlet")
    NEUMANN = "neumann", _("Neumann")


class TraceMode(models.TextChoices):
    VALUE = "value", _("Value")
    NORMAL_DERIVATIVE = "normal-derivative", _("Normal derivative")


@dataclass
class SolverOptions:
    scheme: str = Scheme.GMRES
    tolerance: float = 1e-8
    restart: int = 30
    max_restarts: int = 50
    gamma: float = 0.8
    max_iterations: int = 2000
    workers: int = 1
    control_spacing: float | None = None

    @classmethod
    def from_settings(cls, **overrides):
        defaults = settings.KFBI
        values = {
            "scheme": defaults["SCHEME"],
            "tolerance": defaults["TOLERANCE"],
            "restart": defaults["RESTART"],
            "max_restarts": defaults["MAX_RESTARTS"],
            "gamma": defaults["GAMMA"],
            "max_iterations": defaults["MAX_RICHARDSON_ITERATIONS"],
            "workers": defaults["WORKERS"],
        }
        values.update({key: value for key, value in overrides.items() if value is not None})
        return cls(**values)

    def validate(self):
        if self.tolerance <= 0:
            raise InvalidParameterError(f"Tolerance must be positive, got {self.tolerance}")
        if not 0 < self.gamma <= 1:
            raise InvalidParameterError(f"Richardson gamma must lie in (0, 1], got {self.gamma}")
        if self.restart < 1:
            raise InvalidParameterError(f"GMRES restart must be at least 1, got {self.restart}")
        if self.scheme not in Scheme.values:
            raise InvalidParameterError(f"Unknown iteration scheme {self.scheme!r}")
        if self.workers < 1:
            raise InvalidParameterError(f"Worker count must be positive, got {self.workers}")


@dataclass
class BvpSpec:
    """
    Boundary value problem on the region enclosed by `boundary`.

    `boundary_data(points, normals)` returns g_D or g_N at boundary points;
    `source` is a FunctionSource (or None for f = 0).
    """

    kappa: float
    bc: str
    boundary_data: object
    boundary: object
    grid: object
    source: object = None
    options: SolverOptions = field(default_factory=SolverOptions.from_settings)

    def __post_init__(self):
        if self.kappa < 0:
            raise InvalidParameterError(f"kappa must be non-negative, got {self.kappa}")
        if self.bc not in BoundaryCondition.values:
            raise InvalidParameterError(f"Unknown boundary condition {self.bc!r}")
        self.options.validate()


@dataclass
class IterationStats:
    scheme: str
    outer_iterations: int = 0
    inner_iterations: int = 0
    operator_applications: int = 0
    interface_solves: int = 0
    residual_history: list = field(default_factory=list)
    converged: bool = False
    wall_time: float = 0.0

    @property
    def relative_residual(self):
        return self.residual_history[-1] if self.residual_history else 0.0

    @property
    def iterations(self):
        if self.scheme == Scheme.GMRES:
            return self.inner_iterations
        return self.outer_iterations

    def as_dict(self):
        return {
            "scheme": str(self.scheme),
            "outer_iterations": self.outer_iterations,
            "inner_iterations": self.inner_iterations,
            "operator_applications": self.operator_applications,
            "interface_solves": self.interface_solves,
            "residual_history": [float(r) for r in self.residual_history],
            "relative_residual": float(self.relative_residual),
            "converged": self.converged,
        }


@dataclass
class Solution:
    bc: str
    field: GridField
    inside: np.ndarray
    boundary_values: np.ndarray
    boundary_normal_derivatives: np.ndarray
    density: np.ndarray
    stats: IterationStats

    @property
    def boundary_data(self):
        if self.bc == BoundaryCondition.DIRICHLET:
            return self.boundary_values
        return self.boundary_normal_derivatives

    def masked(self):
        return np.where(self.inside, self.field.values, np.nan)


def scaled_norm(values):
    return float(np.sqrt(np.mean(np.square(values)))) if len(values) else 0.0


def build_operator(boundary, grid, kappa, options=None, geometry=None):
    options = options or SolverOptions.from_settings()
    if geometry is None:
        spacing = options.control_spacing
        geometry = KfbiGeometry.build(boundary, grid, spacing=spacing)
    if options.workers > 1:
        return DistributedKfbiOperator(geometry, kappa, options.workers)
    return KfbiOperator(geometry, kappa)


def eval_volume_potential(operator, source, mode=TraceMode.VALUE):
    """Yf (or its normal derivative) at the control points, with the grid field."""
    points = operator.points
    if source is None:
        return np.zeros(len(points)), operator.geometry.grid.zeros()
    spec = operator.spec(source=source)
    field_values, trace = operator.evaluate(spec)
    if mode == TraceMode.NORMAL_DERIVATIVE:
        return trace.normal_derivative(points.normals), field_values
    return trace.value, field_values


def apply_KD(operator, phi):
    """Interior limit of the double-layer interface solution: (1/2) phi + W phi."""
    _, trace = operator.evaluate(operator.spec(phi=phi))
    return trace.value


def apply_KN(operator, psi):
    """Interior normal derivative of the single-layer interface solution."""
    _, trace = operator.evaluate(operator.spec(psi=psi))
    return trace.normal_derivative(operator.points.normals)


def richardson_solve(operator, rhs, gamma, tol, max_iterations):
    rhs = np.asarray(rhs, dtype=float)
    stats = IterationStats(scheme=Scheme.RICHARDSON)
    density = np.zeros_like(rhs)
    residual = rhs.copy()
    initial = scaled_norm(residual)
    stats.residual_history.append(1.0 if initial else 0.0)
    if initial == 0:
        stats.converged = True
        return density, stats

    for _ in range(max_iterations):
        density = density + gamma * residual
        residual = rhs - operator(density)
        stats.operator_applications += 1
        stats.outer_iterations += 1
        relative = scaled_norm(residual) / initial
        stats.residual_history.append(relative)
        logger.debug("Richardson iteration %d: residual %.3e", stats.outer_iterations, relative)
        if relative < tol:
            stats.converged = True
            return density, stats

    raise ConvergenceError(
        f"Richardson did not reach {tol} in {max_iterations} iterations "
        f"(residual {stats.relative_residual:.3e})",
        stats=stats,
    )


def gmres_solve(operator, rhs, restart, tol, max_restarts):
    """Restarted GMRES: modified Gram-Schmidt Arnoldi, Givens least squares, zero initial guess."""
    rhs = np.asarray(rhs, dtype=float)
    stats = IterationStats(scheme=Scheme.GMRES)
    solution = np.zeros_like(rhs)
    rhs_norm = np.linalg.norm(rhs)
    if rhs_norm == 0:
        stats.residual_history.append(0.0)
        stats.converged = True
        return solution, stats

    residual = rhs.copy()
    for _ in range(max_restarts):
        beta = np.linalg.norm(residual)
        stats.residual_history.append(beta / rhs_norm)
        if beta / rhs_norm < tol:
            stats.converged = True
            return solution, stats
        stats.outer_iterations += 1

        basis = np.zeros((restart + 1, len(rhs)))
        hessenberg = np.zeros((restart + 1, restart))
        cosines = np.zeros(restart)
        sines = np.zeros(restart)
        projected = np.zeros(restart + 1)
        projected[0] = beta
        basis[0] = residual / beta

        steps, breakdown = 0, False
        for j in range(restart):
            w = operator(basis[j])
            stats.operator_applications += 1
            stats.inner_iterations += 1
            for i in range(j + 1):
                hessenberg[i, j] = np.dot(w, basis[i])
                w = w - hessenberg[i, j] * basis[i]
            subdiagonal = np.linalg.norm(w)
            hessenberg[j + 1, j] = subdiagonal

            for i in range(j):
                upper = cosines[i] * hessenberg[i, j] + sines[i] * hessenberg[i + 1, j]
                hessenberg[i + 1, j] = -sines[i] * hessenberg[i, j] + cosines[i] * hessenberg[i + 1, j]
                hessenberg[i, j] = upper
            radius = np.hypot(hessenberg[j, j], subdiagonal)
            if radius == 0:
                raise ConvergenceError("GMRES met a singular operator", stats=stats)
            cosines[j] = hessenberg[j, j] / radius
            sines[j] = subdiagonal / radius
            hessenberg[j, j] = radius
            hessenberg[j + 1, j] = 0.0
            projected[j + 1] = -sines[j] * projected[j]
            projected[j] = cosines[j] * projected[j]

            steps = j + 1
            estimate = abs(projected[j + 1]) / rhs_norm
            stats.residual_history.append(estimate)
            logger.debug("GMRES step %d: residual estimate %.3e", stats.inner_iterations, estimate)
            if subdiagonal <= BREAKDOWN_TOLERANCE * beta:
                breakdown = True
                break
            basis[j + 1] = w / subdiagonal
            if estimate < tol:
                break

        coefficients = scipy.linalg.solve_triangular(hessenberg[:steps, :steps], projected[:steps])
        solution = solution + basis[:steps].T @ coefficients
        if breakdown:
            stats.converged = True
            return solution, stats
        residual = rhs - operator(solution)
        stats.operator_applications += 1

    relative = np.linalg.norm(residual) / rhs_norm
    stats.residual_history.append(relative)
    if relative < tol:
        stats.converged = True
        return solution, stats
    raise ConvergenceError(
        f"GMRES did not reach {tol} in {max_restarts} restarts of {restart} "
        f"(residual {relative:.3e})",
        stats=stats,
    )


def iterate(operator_function, rhs, options):
    if options.scheme == Scheme.RICHARDSON:
        return richardson_solve(
            operator_function, rhs, options.gamma, options.tolerance, options.max_iterations
        )
    return gmres_solve(
        operator_function, rhs, options.restart, options.tolerance, options.max_restarts
    )


def _assemble(operator, bc, density, stats, final_spec, started, solves_before):
    solution_field, trace = operator.evaluate(final_spec)
    stats.interface_solves = operator.interface_solves - solves_before
    stats.wall_time = time.perf_counter() - started
    logger.info(
        "%s solve finished: %d %s iterations, %d interface solves, residual %.2e",
        bc,
        stats.iterations,
        stats.scheme,
        stats.interface_solves,
        stats.relative_residual,
    )
    return Solution(
        bc=bc,
        field=solution_field,
        inside=operator.geometry.classification.inside,
        boundary_values=trace.value,
        boundary_normal_derivatives=trace.normal_derivative(operator.points.normals),
        density=density,
        stats=stats,
    )


def solve_dirichlet(spec, operator=None):
    started = time.perf_counter()
    operator = operator or build_operator(spec.boundary, spec.grid, spec.kappa, spec.options)
    solves_before = operator.interface_solves
    points = operator.points

    data = spec.boundary_data(points.positions, points.normals)
    volume, _ = eval_volume_potential(operator, spec.source, TraceMode.VALUE)
    density, stats = iterate(lambda phi: apply_KD(operator, phi), data - volume, spec.options)

    final_spec = operator.spec(phi=density, source=spec.source)
    return _assemble(
        operator, BoundaryCondition.DIRICHLET, density, stats, final_spec, started, solves_before
    )


def check_compatibility(spec, operator):
    """Pure Neumann Laplace needs the boundary flux to balance the source."""
    points = operator.points
    flux = np.mean(spec.boundary_data(points.positions, points.normals)) * points.perimeter
    grid = operator.geometry.grid
    inside = operator.geometry.classification.inside
    total = 0.0
    tolerance = COMPATIBILITY_TOLERANCE
    if spec.source is not None:
        total = float(np.sum(spec.source.nodal(grid)[inside])) * grid.h**2
        # Node-sum quadrature is only first order in h.
        tolerance = max(tolerance, grid.h)
    magnitude = np.mean(np.abs(spec.boundary_data(points.positions, points.normals)))
    scale = max(magnitude * points.perimeter, abs(total), np.finfo(float).tiny)
    if abs(flux - total) / scale > tolerance:
        raise IncompatibleDataError(
            f"Neumann data is incompatible: boundary flux {flux:.6g} vs source integral {total:.6g}"
        )


def solve_neumann(spec, operator=None):
    started = time.perf_counter()
    operator = operator or build_operator(spec.boundary, spec.grid, spec.kappa, spec.options)
    if spec.kappa == 0:
        check_compatibility(spec, operator)
        raise UnsupportedProblemError(
            "Neumann problems with kappa = 0 are determined only up to a constant; use kappa > 0"
        )
    solves_before = operator.interface_solves
    points = operator.points

    data = spec.boundary_data(points.positions, points.normals)
    volume, _ = eval_volume_potential(operator, spec.source, TraceMode.NORMAL_DERIVATIVE)
    density, stats = iterate(lambda psi: apply_KN(operator, psi), data - volume, spec.options)

    final_spec = operator.spec(psi=density, source=spec.source)
    return _assemble(
        operator, BoundaryCondition.NEUMANN, density, stats, final_spec, started, solves_before
    )


def solve(spec, operator=None):
    if spec.bc == BoundaryCondition.NEUMANN:
        return solve_neumann(spec, operator)
    return solve_dirichlet(spec, operator)
