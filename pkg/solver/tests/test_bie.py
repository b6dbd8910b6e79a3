import numpy as np
import pytest

from core.exceptions import (
    ConvergenceError,
    IncompatibleDataError,
    InvalidParameterError,
    UnsupportedProblemError,
)
from solver.services.bie import (
    BvpSpec,
    Scheme,
    SolverOptions,
    apply_KD,
    apply_KN,
    build_operator,
    eval_volume_potential,
    gmres_solve,
    richardson_solve,
    scaled_norm,
    solve,
)
from solver.services.convergence import solution_errors
from solver.services.grid import build_grid
from solver.services.jumps import FunctionSource
from solver.services.manufactured import get_exact_solution

from .conftest import UNIT_BOX


@pytest.fixture
def grid():
    return build_grid(UNIT_BOX, 48, 48)


@pytest.fixture
def operator(unit_circle, grid):
    return build_operator(unit_circle, grid, 1.0, SolverOptions.from_settings())


def _spec(boundary, grid, name, **options):
    exact = get_exact_solution(name)
    return BvpSpec(
        kappa=exact.kappa,
        bc=exact.bc,
        boundary_data=exact.boundary_data(exact.bc),
        boundary=boundary,
        grid=grid,
        source=exact.source(),
        options=SolverOptions.from_settings(**options),
    )


def test_scaled_norm():
    assert scaled_norm(np.array([3.0, 4.0])) == pytest.approx(np.sqrt(12.5))
    assert scaled_norm(np.array([])) == 0.0


def test_gmres_identity(rng):
    rhs = rng.standard_normal(20)
    solution, stats = gmres_solve(lambda v: v, rhs, restart=10, tol=1e-12, max_restarts=3)
    np.testing.assert_allclose(solution, rhs, atol=1e-14)
    assert stats.converged
    assert stats.inner_iterations == 1
    assert stats.relative_residual < 1e-14


def test_gmres_two_by_two_diagonal(rng):
    diagonal = np.array([1.0, 2.0])
    rhs = rng.standard_normal(2)
    solution, stats = gmres_solve(lambda v: diagonal * v, rhs, restart=2, tol=1e-12, max_restarts=3)
    np.testing.assert_allclose(solution, rhs / diagonal, atol=1e-12)
    assert stats.inner_iterations <= 2


def test_gmres_dense_system(rng):
    n = 50
    matrix = np.eye(n) + 0.5 * rng.standard_normal((n, n)) / np.sqrt(n)
    rhs = rng.standard_normal(n)
    solution, stats = gmres_solve(lambda v: matrix @ v, rhs, restart=30, tol=1e-10, max_restarts=50)
    np.testing.assert_allclose(solution, np.linalg.solve(matrix, rhs), atol=1e-8)
    assert stats.converged
    assert stats.residual_history[0] == 1.0


def test_gmres_zero_rhs():
    solution, stats = gmres_solve(lambda v: 2 * v, np.zeros(4), restart=3, tol=1e-8, max_restarts=2)
    assert not solution.any()
    assert stats.inner_iterations == 0


def test_gmres_reports_non_convergence():
    diagonal = np.linspace(1.0, 1000.0, 200)
    with pytest.raises(ConvergenceError) as excinfo:
        gmres_solve(lambda v: diagonal * v, np.ones(200), restart=2, tol=1e-12, max_restarts=1)
    assert excinfo.value.stats.outer_iterations == 1
    assert excinfo.value.reason == "no-convergence"


def test_richardson_identity(rng):
    rhs = rng.standard_normal(8)
    solution, stats = richardson_solve(lambda v: v, rhs, gamma=1.0, tol=1e-12, max_iterations=5)
    np.testing.assert_allclose(solution, rhs)
    assert stats.outer_iterations == 1


def test_richardson_zero_rhs():
    solution, stats = richardson_solve(lambda v: v, np.zeros(5), gamma=0.8, tol=1e-8, max_iterations=5)
    assert not solution.any()
    assert stats.outer_iterations == 0


def test_richardson_contraction(rng):
    rhs = rng.standard_normal(6)
    solution, stats = richardson_solve(lambda v: 0.5 * v, rhs, gamma=0.8, tol=1e-10, max_iterations=100)
    np.testing.assert_allclose(solution, 2 * rhs, atol=1e-8)
    assert stats.residual_history == sorted(stats.residual_history, reverse=True)


def test_richardson_divergence():
    with pytest.raises(ConvergenceError):
        richardson_solve(lambda v: 3 * v, np.ones(3), gamma=1.0, tol=1e-8, max_iterations=20)


@pytest.mark.parametrize(
    "overrides",
    [{"tolerance": -1.0}, {"gamma": 1.5}, {"restart": 0}, {"scheme": "cg"}, {"workers": 0}],
)
def test_invalid_options(unit_circle, grid, overrides):
    with pytest.raises(InvalidParameterError):
        _spec(unit_circle, grid, "harmonic-exp", **overrides)


def test_invalid_problem(unit_circle, grid):
    with pytest.raises(InvalidParameterError):
        BvpSpec(kappa=-1.0, bc="dirichlet", boundary_data=None, boundary=unit_circle, grid=grid)
    with pytest.raises(InvalidParameterError):
        BvpSpec(kappa=1.0, bc="robin", boundary_data=None, boundary=unit_circle, grid=grid)


def test_zero_density_gives_zero_trace(operator):
    assert not apply_KD(operator, np.zeros(operator.points.count)).any()


def test_operators_are_linear(operator, rng):
    count = operator.points.count
    a, b = rng.standard_normal((2, count))
    for apply in (apply_KD, apply_KN):
        combined = apply(operator, 2.0 * a - b)
        separate = 2.0 * apply(operator, a) - apply(operator, b)
        np.testing.assert_allclose(combined, separate, atol=1e-9 * np.abs(separate).max())


def test_volume_potential(operator):
    trace, field = eval_volume_potential(operator, None)
    assert not trace.any() and not field.values.any()
    source = FunctionSource(lambda x, y: np.exp(x))
    single, _ = eval_volume_potential(operator, source)
    double, _ = eval_volume_potential(operator, FunctionSource(lambda x, y: 2 * np.exp(x)))
    np.testing.assert_allclose(double, 2 * single, atol=1e-12)


def test_dirichlet_fixed_point(unit_circle, grid):
    spec = _spec(unit_circle, grid, "harmonic-exp")
    operator = build_operator(unit_circle, grid, spec.kappa, spec.options)
    solution = solve(spec, operator=operator)
    data = spec.boundary_data(operator.points.positions, operator.points.normals)
    residual = apply_KD(operator, solution.density) - data
    assert scaled_norm(residual) <= 2 * spec.options.tolerance * scaled_norm(data)
    np.testing.assert_allclose(solution.boundary_values, data, atol=1e-6)
    assert solution.stats.converged
    assert solution.stats.interface_solves == solution.stats.operator_applications + 1


def test_harmonic_dirichlet_accuracy(unit_circle, grid):
    spec = _spec(unit_circle, grid, "harmonic-exp")
    solution = solve(spec)
    e_inf, e_l2 = solution_errors(solution, get_exact_solution("harmonic-exp"), grid)
    assert e_inf < 1e-3
    assert e_l2 <= e_inf


def test_constant_one_dirichlet(unit_circle, grid):
    spec = _spec(unit_circle, grid, "constant-one")
    solution = solve(spec)
    e_inf, _ = solution_errors(solution, get_exact_solution("constant-one"), grid)
    assert e_inf < 1e-3


def test_neumann_with_positive_kappa(unit_circle, grid):
    spec = _spec(unit_circle, grid, "neumann-cos-sinh")
    solution = solve(spec)
    e_inf, _ = solution_errors(solution, get_exact_solution("neumann-cos-sinh"), grid)
    assert e_inf < 1e-2
    assert solution.bc == "neumann"


def test_richardson_needs_more_applications_than_gmres(unit_circle, grid):
    gmres = solve(_spec(unit_circle, grid, "harmonic-exp"))
    richardson = solve(_spec(unit_circle, grid, "harmonic-exp", scheme=Scheme.RICHARDSON))
    assert richardson.stats.converged
    assert gmres.stats.operator_applications <= richardson.stats.operator_applications
    tolerance = SolverOptions.from_settings().tolerance
    difference = scaled_norm(gmres.density - richardson.density)
    assert difference <= 10 * tolerance * scaled_norm(gmres.density)


def test_pure_neumann_laplace_is_unsupported(unit_circle, grid):
    exact = get_exact_solution("harmonic-exp")
    spec = BvpSpec(
        kappa=0.0,
        bc="neumann",
        boundary_data=exact.neumann_data,
        boundary=unit_circle,
        grid=grid,
    )
    with pytest.raises(UnsupportedProblemError):
        solve(spec)


def test_incompatible_neumann_data(unit_circle, grid):
    spec = BvpSpec(
        kappa=0.0,
        bc="neumann",
        boundary_data=lambda points, normals: np.ones(len(points)),
        boundary=unit_circle,
        grid=grid,
    )
    with pytest.raises(IncompatibleDataError):
        solve(spec)


def test_stats_as_dict(unit_circle, grid):
    stats = solve(_spec(unit_circle, grid, "harmonic-exp")).stats.as_dict()
    assert stats["scheme"] == "gmres"
    assert stats["converged"] is True
    assert stats["relative_residual"] < 1e-8
