import csv
import json
from io import StringIO
from unittest import mock

import pytest
from django.core.management import call_command
from django.core.management.base import CommandError

from solver.management.commands.solve import Command as SolveCommand
from solver.models import ConvergenceRow, RunStatus, SolverRun


def _call(name, **options):
    stdout = StringIO()
    call_command(name, stdout=stdout, **options)
    return stdout.getvalue()


def test_selftest_passes():
    output = _call("selftest")
    assert "PASS geometry" in output
    assert "PASS correction" in output
    assert "FAIL" not in output


def test_solve_writes_report_and_field(tmp_path):
    report = tmp_path / "report.json"
    field = tmp_path / "field.csv"
    output = _call("solve", grid=32, report=str(report), out=str(field))
    assert output.startswith("N=32 gmres")

    stored = json.loads(report.read_text())
    assert stored["command"] == "solve"
    assert stored["stats"]["converged"] is True
    assert stored["stats"]["e_inf"] < 1e-2
    assert stored["config"]["grid"]["n"] == 32
    with open(field, newline="") as stream:
        assert sum(1 for _ in csv.reader(stream)) == 33 * 33 + 1


def test_solve_classification_dump(tmp_path):
    path = tmp_path / "classification.csv"
    _call("solve", grid=32, classification=str(path))
    assert path.read_text().splitlines()[0] == "i,j,side,irregular"


def test_negative_tolerance_is_a_config_error():
    with pytest.raises(CommandError) as excinfo:
        _call("solve", grid=32, tol=-1.0)
    assert excinfo.value.returncode == 2
    assert str(excinfo.value).startswith("config-error:")
    assert "solver.tol" in str(excinfo.value)


def test_too_many_workers_is_a_config_error():
    with pytest.raises(CommandError) as excinfo:
        _call("solve", grid=8, workers=4)
    assert excinfo.value.returncode == 2
    assert "slab-too-small" in str(excinfo.value)


def test_unwritable_report_is_an_io_error(tmp_path):
    with pytest.raises(CommandError) as excinfo:
        _call("solve", grid=32, report=str(tmp_path / "missing" / "report.json"))
    assert excinfo.value.returncode == 4
    assert str(excinfo.value).startswith("io-error:")


def test_distributed_solve_writes_a_transcript(tmp_path):
    transcript = tmp_path / "messages.jsonl"
    output = _call("solve", grid=32, workers=2, transcript=str(transcript))
    assert "iterations=" in output
    records = [json.loads(line) for line in transcript.read_text().splitlines()]
    assert records
    assert {"ghost-exchange", "boundary-gather"} <= {record["tag"] for record in records}
    assert all(record["sender"] != record["receiver"] for record in records)


def test_converge_writes_a_table(tmp_path):
    table = tmp_path / "table.csv"
    output = _call("converge", refine="32,64", table=str(table))
    assert "FAILED" not in output
    with open(table, newline="") as stream:
        rows = list(csv.DictReader(stream))
    assert [row["grid"] for row in rows] == ["32", "64"]
    assert rows[0]["order_inf"] == ""
    assert float(rows[1]["e_inf"]) < float(rows[0]["e_inf"])


def test_converge_keeps_failed_rows(tmp_path):
    table = tmp_path / "table.csv"
    with pytest.raises(CommandError) as excinfo:
        _call("converge", refine="8,32", table=str(table))
    assert excinfo.value.returncode == 1
    lines = table.read_text().splitlines()
    assert len(lines) == 3
    assert "FAILED" in lines[1]
    assert "FAILED" not in lines[2]


def test_gray_scott_from_a_config_file(tmp_path):
    config = tmp_path / "gs.toml"
    config.write_text("[grid]\nn = 48\n\n[gray_scott]\nsteps = 1\n")
    report = tmp_path / "report.json"
    output = _call("gray_scott", config=str(config), out=str(tmp_path / "gs.csv"), report=str(report))
    assert output.startswith("t=0.125")
    assert (tmp_path / "gs_u_t0.125.csv").exists()
    assert (tmp_path / "gs_v_t0.125.csv").exists()
    stats = json.loads(report.read_text())["stats"]
    assert stats["steps"] == 1
    assert stats["splitting"] == "strang"


@pytest.mark.django_db
def test_recorded_solve_converges():
    _call("solve", grid=32, record=True)
    run = SolverRun.objects.get()
    assert run.status == RunStatus.CONVERGED
    assert run.command == "solve"
    assert run.iterations > 0
    assert run.relative_residual < 1e-8
    assert run.finished_at >= run.started_at


@pytest.mark.django_db
def test_recorded_converge_failure_keeps_rows():
    with pytest.raises(CommandError):
        _call("converge", refine="8,32", record=True)
    run = SolverRun.objects.get()
    assert run.status == RunStatus.FAILED
    assert run.error.startswith("solver-error:")
    assert list(ConvergenceRow.objects.filter(run=run).values_list("failed", flat=True)) == [True, False]


@pytest.mark.django_db
def test_recorded_run_fails_on_unexpected_errors():
    with mock.patch.object(SolveCommand, "run", side_effect=RuntimeError("worker crashed")):
        with pytest.raises(RuntimeError):
            _call("solve", grid=32, record=True)
    run = SolverRun.objects.get()
    assert run.status == RunStatus.FAILED
    assert run.error == "RuntimeError: worker crashed"
    assert run.finished_at is not None
