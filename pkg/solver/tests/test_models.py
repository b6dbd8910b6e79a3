from pathlib import Path

import pytest
from django.conf import settings
from django.test import RequestFactory, override_settings
from django_fsm import TransitionNotAllowed

from kfbi.utils import environment_callback
from kfbi.views import dashboard_callback
from solver.models import ConvergenceRow, RunCommand, RunStatus, SolverRun
from solver.services.convergence import ErrorRow

pytestmark = pytest.mark.django_db


@pytest.fixture
def run():
    return SolverRun.objects.create(command=RunCommand.SOLVE, config={"grid": {"n": 32}})


def test_new_runs_are_pending(run):
    assert run.status == RunStatus.PENDING
    assert str(run) == f"{run.get_command_display()} #{run.pk}"


def test_finish_stores_the_report(run):
    run.start()
    run.finish(
        {
            "wall_time": 1.5,
            "stats": {"scheme": "gmres", "inner_iterations": 12, "relative_residual": 3e-9},
        }
    )
    run.save()
    run.refresh_from_db()
    assert run.status == RunStatus.CONVERGED
    assert run.iterations == 12
    assert run.relative_residual == 3e-9
    assert run.wall_time == 1.5


def test_richardson_runs_count_outer_iterations(run):
    run.start()
    run.finish({"stats": {"scheme": "richardson", "outer_iterations": 40, "inner_iterations": 0}})
    assert run.iterations == 40


def test_fail_from_pending(run):
    run.fail("config-error: tol")
    assert run.status == RunStatus.FAILED
    assert run.error == "config-error: tol"
    assert run.finished_at is not None


def test_finish_requires_a_running_run(run):
    with pytest.raises(TransitionNotAllowed):
        run.finish()


def test_failed_runs_cannot_restart(run):
    run.fail()
    with pytest.raises(TransitionNotAllowed):
        run.start()


def test_rows_from_the_error_table(run):
    rows = [
        ErrorRow(grid=8, h=0.3, failure="near-box: control point too close"),
        ErrorRow(grid=32, h=0.075, e_inf=1e-4, e_l2=5e-5, iters=8),
    ]
    ConvergenceRow.objects.bulk_create(ConvergenceRow.from_error_row(run, row) for row in rows)
    stored = list(run.rows.all())
    assert [row.grid for row in stored] == [8, 32]
    assert stored[0].failed and stored[0].e_inf is None
    assert stored[1].e_inf == 1e-4
    assert str(stored[1]) == f"{run} N=32"


def test_dashboard_counts_runs(run):
    SolverRun.objects.create(command=RunCommand.CONVERGE, status=RunStatus.FAILED)
    context = dashboard_callback(RequestFactory().get("/admin/"), {})
    values = [item["value"] for item in context["navigation"][0]["items"]]
    assert values == [2, 0, 1]


@override_settings(DEBUG=False, SENTRY_DSN=None)
def test_environment_badge_without_error_reporting():
    assert environment_callback(None)[1] == "danger"


def test_template_directories_exist():
    for engine in settings.TEMPLATES:
        for directory in engine["DIRS"]:
            assert Path(directory).is_dir()
