from django.db import models
from django.utils import timezone
from django.utils.translation import gettext_lazy as _
from django_fsm import FSMField, transition

from core.models import AuditedModel


class RunCommand(models.TextChoices):
    SOLVE = "solve", _("Solve")
    CONVERGE = "converge", _("Convergence study")
    GRAY_SCOTT = "gray-scott", _("Gray-Scott")
    SELFTEST = "selftest", _("Self test")


class RunStatus(models.TextChoices):
    """Solver run status choices."""

    PENDING = "PENDING", _("Pending")
    RUNNING = "RUNNING", _("Running")
    CONVERGED = "CONVERGED", _("Converged")
    FAILED = "FAILED", _("Failed")


class SolverRun(AuditedModel):
    """One recorded invocation of a solver command."""

    command = models.CharField(_("Command"), max_length=20, choices=RunCommand.choices)
    config = models.JSONField(_("Configuration"), default=dict)

    # FSM State
    status = FSMField(
        _("Status"),
        default=RunStatus.PENDING,
        choices=RunStatus.choices,
    )

    scheme = models.CharField(_("Scheme"), max_length=20, blank=True)
    workers = models.PositiveIntegerField(_("Workers"), default=1)
    grid_size = models.PositiveIntegerField(_("Grid size"), null=True, blank=True)

    # Results
    iterations = models.PositiveIntegerField(_("Iterations"), null=True, blank=True)
    relative_residual = models.FloatField(_("Final residual"), null=True, blank=True)
    wall_time = models.FloatField(_("Wall time (s)"), null=True, blank=True)
    report = models.JSONField(_("Report"), null=True, blank=True)

    started_at = models.DateTimeField(_("Started at"), null=True, blank=True)
    finished_at = models.DateTimeField(_("Finished at"), null=True, blank=True)
    error = models.TextField(_("Error"), blank=True)

    class Meta:
        verbose_name = _("Solver Run")
        verbose_name_plural = _("Solver Runs")
        ordering = ["-created_at"]

    def __str__(self):
        return f"{self.get_command_display()} #{self.pk}"

    # FSM Transitions
    @transition(field=status, source=RunStatus.PENDING, target=RunStatus.RUNNING)
    def start(self):
        self.started_at = timezone.now()

    @transition(field=status, source=RunStatus.RUNNING, target=RunStatus.CONVERGED)
    def finish(self, report=None):
        """Store the run report and its headline numbers."""
        self.finished_at = timezone.now()
        self.report = report
        if not report:
            return
        self.wall_time = report.get("wall_time")
        stats = report.get("stats") or {}
        self.scheme = stats.get("scheme", self.scheme)
        self.relative_residual = stats.get("relative_residual")
        if self.scheme == "gmres":
            self.iterations = stats.get("inner_iterations")
        else:
            self.iterations = stats.get("outer_iterations")

    @transition(
        field=status,
        source=[RunStatus.PENDING, RunStatus.RUNNING],
        target=RunStatus.FAILED,
    )
    def fail(self, error=""):
        self.finished_at = timezone.now()
        self.error = error


class ConvergenceRow(AuditedModel):
    """One grid of a convergence study."""

    run = models.ForeignKey(
        SolverRun,
        on_delete=models.CASCADE,
        related_name="rows",
        verbose_name=_("Run"),
    )
    grid = models.PositiveIntegerField(_("Grid"))
    h = models.FloatField(_("Spacing"))
    e_inf = models.FloatField(_("Max error"), null=True, blank=True)
    e_l2 = models.FloatField(_("L2 error"), null=True, blank=True)
    order_inf = models.FloatField(_("Max-norm order"), null=True, blank=True)
    order_l2 = models.FloatField(_("L2 order"), null=True, blank=True)
    iters = models.PositiveIntegerField(_("Iterations"), null=True, blank=True)
    failed = models.BooleanField(_("Failed"), default=False)
    failure = models.TextField(_("Failure"), blank=True)

    class Meta:
        verbose_name = _("Convergence Row")
        verbose_name_plural = _("Convergence Rows")
        unique_together = ["run", "grid"]
        ordering = ["run", "grid"]

    def __str__(self):
        return f"{self.run} N={self.grid}"

    @classmethod
    def from_error_row(cls, run, row):
        return cls(
            run=run,
            grid=row.grid,
            h=row.h,
            e_inf=row.e_inf,
            e_l2=row.e_l2,
            order_inf=row.order_inf,
            order_l2=row.order_l2,
            iters=row.iters,
            failed=row.failed,
            failure=row.failure,
        )
