import logging
from dataclasses import dataclass

import numpy as np
import scipy.fft

from core.exceptions import InvalidParameterError, TransformSizeError, ZeroPivotError

from .grid import GridField

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TridiagonalSystem:
    """
    Tridiagonal system with optional trailing batch axis.

    All arrays have the unknown index first. lower[0] and upper[-1] are unused.
    """

    lower: np.ndarray
    diag: np.ndarray
    upper: np.ndarray
    rhs: np.ndarray | None = None

    def __post_init__(self):
        if not (len(self.lower) == len(self.diag) == len(self.upper)):
            raise InvalidParameterError(
                f"Diagonal lengths differ: {len(self.lower)}, {len(self.diag)}, {len(self.upper)}"
            )
        if self.rhs is not None and len(self.rhs) != len(self.diag):
            raise InvalidParameterError(
                f"Right-hand side has length {len(self.rhs)}, system has {len(self.diag)}"
            )

    @property
    def size(self):
        return len(self.diag)

    def with_rhs(self, rhs):
        return TridiagonalSystem(self.lower, self.diag, self.upper, rhs)

    def rows(self, start, stop):
        rhs = None if self.rhs is None else self.rhs[start:stop]
        return TridiagonalSystem(
            self.lower[start:stop], self.diag[start:stop], self.upper[start:stop], rhs
        )

    def matvec(self, u):
        result = self.diag * u
        result[1:] += self.lower[1:] * u[:-1]
        result[:-1] += self.upper[:-1] * u[1:]
        return result

    def to_dense(self):
        """Dense matrix of an unbatched system."""
        n = self.size
        matrix = np.diag(np.asarray(self.diag, dtype=float))
        matrix[np.arange(1, n), np.arange(n - 1)] = self.lower[1:]
        matrix[np.arange(n - 1), np.arange(1, n)] = self.upper[:-1]
        return matrix


def thomas_solve(system):
    """Gaussian elimination without pivoting, vectorised over the batch axis."""
    rhs = np.asarray(system.rhs, dtype=float)
    lower, diag, upper = (np.asarray(a, dtype=float) for a in (system.lower, system.diag, system.upper))
    while diag.ndim < rhs.ndim:
        lower, diag, upper = lower[..., None], diag[..., None], upper[..., None]

    n = len(diag)
    sweep = np.empty(np.broadcast_shapes(diag.shape, rhs.shape))
    forward = np.empty_like(sweep)
    pivot = diag[0]
    if np.any(pivot == 0):
        raise ZeroPivotError("Zero pivot in row 0")
    sweep[0] = upper[0] / pivot
    forward[0] = rhs[0] / pivot
    for row in range(1, n):
        pivot = diag[row] - lower[row] * sweep[row - 1]
        if np.any(pivot == 0):
            raise ZeroPivotError(f"Zero pivot in row {row}")
        sweep[row] = upper[row] / pivot
        forward[row] = (rhs[row] - lower[row] * forward[row - 1]) / pivot

    solution = np.empty_like(forward)
    solution[-1] = forward[-1]
    for row in range(n - 2, -1, -1):
        solution[row] = forward[row] - sweep[row] * solution[row + 1]
    return solution


def fst_forward(values, axis=-1):
    """DST-I of the interior samples along `axis`."""
    if values.shape[axis] < 1:
        raise TransformSizeError("Sine transform needs at least one interior sample")
    return scipy.fft.dst(values, type=1, axis=axis) / 2.0


def fst_inverse(coefficients, axis=-1):
    """Inverse of fst_forward; the 2/J factor sits here."""
    count = coefficients.shape[axis]
    if count < 1:
        raise TransformSizeError("Sine transform needs at least one mode")
    return scipy.fft.dst(coefficients, type=1, axis=axis) / (count + 1)


@dataclass(frozen=True)
class SpectralPlan:
    """Per-mode tridiagonal systems of the y-transformed five-point operator."""

    I: int  # noqa: E741
    J: int
    h: float
    kappa: float
    eigenvalues: np.ndarray

    @property
    def mode_count(self):
        return self.J - 1

    def mode_system(self):
        """Tridiagonal systems along x for every mode, batch axis = mode."""
        inverse_h2 = 1.0 / self.h**2
        shape = (self.I - 1, self.mode_count)
        diag = np.broadcast_to(-2.0 * inverse_h2 + self.eigenvalues - self.kappa, shape).copy()
        off = np.full(shape, inverse_h2)
        return TridiagonalSystem(lower=off, diag=diag, upper=off.copy())


def make_plan(grid, kappa):
    if kappa < 0:
        raise InvalidParameterError(f"kappa must be non-negative, got {kappa}")
    if grid.J < 2 or grid.I < 2:
        raise TransformSizeError(f"Grid {grid.I}x{grid.J} has no interior modes")

    k = np.arange(1, grid.J)
    eigenvalues = -4.0 / grid.h**2 * np.sin(k * np.pi / (2.0 * grid.J)) ** 2
    dominance = np.abs(-2.0 / grid.h**2 + eigenvalues - kappa) - 2.0 / grid.h**2
    if np.any(dominance < 0):
        raise InvalidParameterError("Mode systems are not diagonally dominant")
    return SpectralPlan(I=grid.I, J=grid.J, h=grid.h, kappa=float(kappa), eigenvalues=eigenvalues)


def apply_five_point(values, h, kappa):
    """(L_h - kappa) v at interior nodes; zero on the box boundary."""
    result = np.zeros_like(values)
    result[1:-1, 1:-1] = (
        values[2:, 1:-1]
        + values[:-2, 1:-1]
        + values[1:-1, 2:]
        + values[1:-1, :-2]
        - 4.0 * values[1:-1, 1:-1]
    ) / h**2 - kappa * values[1:-1, 1:-1]
    return result


def solve_interface_system(rhs, kappa, plan):
    """Five-point solve with homogeneous Dirichlet data on the box."""
    grid = rhs.grid
    if plan.kappa != kappa:
        raise InvalidParameterError(f"Plan was built for kappa={plan.kappa}, not {kappa}")

    coefficients = fst_forward(rhs.values[1:-1, 1:-1], axis=1)
    modes = thomas_solve(plan.mode_system().with_rhs(coefficients))
    values = np.zeros(grid.shape)
    values[1:-1, 1:-1] = fst_inverse(modes, axis=1)
    return GridField(grid, values)
