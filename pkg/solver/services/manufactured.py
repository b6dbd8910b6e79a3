from dataclasses import dataclass

import numpy as np

from core.exceptions import InvalidParameterError

from .jumps import FunctionSource


@dataclass(frozen=True)
class ExactSolution:
    """Closed-form solution u* used to manufacture boundary data and sources."""

    name: str
    value: object
    gradient: object
    laplacian: object
    kappa: float
    bc: str

    def source(self, kappa=None):
        """f = Lap(u*) - kappa u*, or None when it vanishes identically."""
        kappa = self.kappa if kappa is None else kappa
        if self.name in HARMONIC and kappa == 0:
            return None
        return FunctionSource(lambda x, y: self.laplacian(x, y) - kappa * self.value(x, y))

    def dirichlet_data(self, points, normals):
        return self.value(points[:, 0], points[:, 1])

    def neumann_data(self, points, normals):
        ux, uy = self.gradient(points[:, 0], points[:, 1])
        return ux * normals[:, 0] + uy * normals[:, 1]

    def boundary_data(self, bc):
        return self.neumann_data if bc == "neumann" else self.dirichlet_data

    def on_grid(self, grid):
        x, y = grid.mesh()
        return np.broadcast_to(self.value(x, y), grid.shape)


def _zero(x, y):
    return np.zeros(np.broadcast(x, y).shape)


CATALOG = {
    "harmonic-exp": ExactSolution(
        name="harmonic-exp",
        value=lambda x, y: np.exp(x) * np.cos(y) + np.exp(y) * np.sin(x),
        gradient=lambda x, y: (
            np.exp(x) * np.cos(y) + np.exp(y) * np.cos(x),
            -np.exp(x) * np.sin(y) + np.exp(y) * np.sin(x),
        ),
        laplacian=_zero,
        kappa=0.0,
        bc="dirichlet",
    ),
    "constant-one": ExactSolution(
        name="constant-one",
        value=lambda x, y: np.ones(np.broadcast(x, y).shape),
        gradient=lambda x, y: (_zero(x, y), _zero(x, y)),
        laplacian=_zero,
        kappa=1.0,
        bc="dirichlet",
    ),
    "neumann-cos-sinh": ExactSolution(
        name="neumann-cos-sinh",
        value=lambda x, y: np.cos(x) * np.sinh(y),
        gradient=lambda x, y: (-np.sin(x) * np.sinh(y), np.cos(x) * np.cosh(y)),
        laplacian=_zero,
        kappa=1.0,
        bc="neumann",
    ),
    "poisson-quadratic": ExactSolution(
        name="poisson-quadratic",
        value=lambda x, y: x * x + y * y,
        gradient=lambda x, y: (2.0 * x, 2.0 * y),
        laplacian=lambda x, y: np.full(np.broadcast(x, y).shape, 4.0),
        kappa=0.0,
        bc="dirichlet",
    ),
}

HARMONIC = {"harmonic-exp", "constant-one", "neumann-cos-sinh"}


def get_exact_solution(name):
    try:
        return CATALOG[name]
    except KeyError as exc:
        raise InvalidParameterError(
            f"Unknown exact solution {name!r}; choose from {sorted(CATALOG)}"
        ) from exc
