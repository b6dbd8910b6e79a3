"""Shared plumbing of the solver management commands."""

import logging
import time
from contextlib import contextmanager

from django.core.exceptions import ValidationError
from django.core.management.base import BaseCommand, CommandError

from core.exceptions import (
    AnisotropicGridError,
    ConvergenceError,
    InvalidParameterError,
    KfbiError,
    TooManyWorkersError,
)
from solver.config import parse_config
from solver.models import SolverRun
from solver.services.writers import build_report, write_report

logger = logging.getLogger(__name__)


class ExitCode:
    OK = 0
    SOLVER = 1
    CONFIG = 2
    NO_CONVERGENCE = 3
    IO = 4


# Solver errors that only a bad configuration can trigger.
CONFIG_ERRORS = (InvalidParameterError, AnisotropicGridError, TooManyWorkersError)


def _one_line(text):
    return " ".join(str(text).split())


def command_error(exc):
    """CommandError with a `reason: message` line and the matching exit code."""
    if isinstance(exc, ValidationError):
        message = "; ".join(exc.messages)
        return CommandError(f"config-error: {_one_line(message)}", returncode=ExitCode.CONFIG)
    if isinstance(exc, OSError):
        return CommandError(f"io-error: {_one_line(exc)}", returncode=ExitCode.IO)
    if isinstance(exc, ConvergenceError):
        code = ExitCode.NO_CONVERGENCE
    elif isinstance(exc, CONFIG_ERRORS):
        code = ExitCode.CONFIG
    else:
        code = ExitCode.SOLVER
    return CommandError(f"{exc.reason}: {_one_line(exc)}", returncode=code)


class SolverCommand(BaseCommand):
    """
    Base class of the solver commands.

    Subclasses implement `run(config)` returning the report fields
    (`stats`, `table`) and print their own summary. A `failure` entry is
    raised after the report is written.
    """

    command = "solve"
    flags = ("grid", "box", "domain", "kappa", "bc", "exact", "scheme", "tol", "gamma",
             "restart", "workers", "transcript", "out", "report", "format")

    def add_arguments(self, parser):
        parser.add_argument("--config", help="TOML run configuration")
        options = {
            "grid": {"type": int, "help": "Cells per side"},
            "box": {"help": "x_lo,x_hi,y_lo,y_hi"},
            "refine": {"help": "Comma-separated grid sizes"},
            "domain": {"help": "kind:params, e.g. star:1.0,0.2,4"},
            "kappa": {"type": float},
            "bc": {"choices": ["dirichlet", "neumann"]},
            "exact": {"help": "Manufactured solution name"},
            "scheme": {"choices": ["gmres", "richardson"]},
            "tol": {"type": float},
            "gamma": {"type": float},
            "restart": {"type": int},
            "workers": {"type": int},
            "transcript": {"help": "JSON-lines message transcript path"},
            "out": {"help": "Field output path"},
            "report": {"help": "JSON report path"},
            "table": {"help": "Error table CSV path"},
            "format": {"choices": ["csv", "vtk"]},
        }
        for flag in self.flags:
            parser.add_argument(f"--{flag}", **options[flag])
        parser.add_argument(
            "--record", action="store_true", help="Store the run in the database"
        )

    def load_config(self, options):
        overrides = {flag: options.get(flag) for flag in self.flags}
        config = parse_config(options.get("config"), overrides, command=self.command)
        # Shape and grid preconditions surface before any solve.
        config.boundary()
        config.build_grid()
        return config

    def run(self, config):
        raise NotImplementedError

    def handle(self, *args, **options):
        started = time.perf_counter()
        try:
            config = self.load_config(options)
        except (ValidationError, KfbiError, OSError) as exc:
            raise command_error(exc) from exc

        with self.recorded(config, options["record"]) as run:
            try:
                fields = self.run(config)
            except (KfbiError, OSError) as exc:
                raise command_error(exc) from exc
            report = build_report(
                self.command,
                config.as_dict(),
                stats=fields.get("stats"),
                wall_time=time.perf_counter() - started,
                workers=config.workers,
                table=fields.get("table"),
            )
            try:
                if config.output.get("report"):
                    write_report(report, config.output["report"])
            except (OSError, ValidationError) as exc:
                raise command_error(exc) from exc
            if run is not None:
                self.store_rows(run, fields)
            if fields.get("failure") is not None:
                raise command_error(fields["failure"])
            if run is not None:
                run.finish(report)
                run.save()

    def store_rows(self, run, fields):
        pass

    @contextmanager
    def recorded(self, config, record):
        """Track the run in the registry when `record` is set."""
        if not record:
            yield None
            return
        run = SolverRun.objects.create(
            command=self.command,
            config=config.as_dict(),
            scheme=config.solver.get("scheme", ""),
            workers=config.workers,
            grid_size=config.grid.get("n"),
        )
        run.start()
        run.save()
        try:
            yield run
        except CommandError as exc:
            run.fail(str(exc))
            run.save()
            raise
        except Exception as exc:
            run.fail(f"{type(exc).__name__}: {_one_line(exc)}")
            run.save()
            raise
