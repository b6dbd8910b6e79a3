from django.contrib import admin
from django.utils.translation import gettext_lazy as _
from unfold.admin import ModelAdmin, TabularInline
from unfold.contrib.filters.admin import ChoicesCheckboxFilter, RangeDateFilter
from unfold.decorators import display

from .models import ConvergenceRow, RunStatus, SolverRun


def _scientific(value):
    return "-" if value is None else f"{value:.3e}"


class ConvergenceRowInline(TabularInline):
    """Error table of a convergence run."""

    model = ConvergenceRow
    extra = 0
    fields = ["grid", "h", "e_inf", "e_l2", "order_inf", "order_l2", "iters", "failed"]
    readonly_fields = fields
    ordering = ["grid"]
    max_num = 0
    can_delete = False

    def has_add_permission(self, request, obj=None):
        return False


@admin.register(SolverRun)
class SolverRunAdmin(ModelAdmin):
    """Solver run admin."""

    list_display = [
        "display_header",
        "scheme",
        "workers",
        "grid_size",
        "iterations",
        "display_residual",
        "display_wall_time",
        "display_status",
    ]
    list_filter = [
        ("status", ChoicesCheckboxFilter),
        ("command", ChoicesCheckboxFilter),
        ("created_at", RangeDateFilter),
    ]
    search_fields = ["error", "scheme"]
    readonly_fields = [
        "command",
        "config",
        "status",
        "scheme",
        "workers",
        "grid_size",
        "iterations",
        "relative_residual",
        "wall_time",
        "report",
        "started_at",
        "finished_at",
        "error",
        "created_at",
        "modified_at",
    ]
    ordering = ["-created_at"]

    fieldsets = [
        (
            _("Run"),
            {
                "fields": [
                    ("command", "status"),
                    ("scheme", "workers", "grid_size"),
                    ("iterations", "relative_residual", "wall_time"),
                ]
            },
        ),
        (
            _("Configuration"),
            {
                "classes": ["tab"],
                "fields": ["config"],
            },
        ),
        (
            _("Report"),
            {
                "classes": ["tab"],
                "fields": ["report", "error"],
            },
        ),
        (
            _("Timestamps"),
            {
                "classes": ["tab"],
                "fields": [
                    ("started_at", "finished_at"),
                    ("created_at", "modified_at"),
                ],
            },
        ),
    ]

    inlines = [ConvergenceRowInline]

    def has_add_permission(self, request):
        return False

    @display(description=_("Run"), header=True)
    def display_header(self, instance):
        return [instance.get_command_display(), f"#{instance.pk}"]

    @display(description=_("Residual"))
    def display_residual(self, instance):
        return _scientific(instance.relative_residual)

    @display(description=_("Wall time"))
    def display_wall_time(self, instance):
        return "-" if instance.wall_time is None else f"{instance.wall_time:.2f}s"

    @display(
        description=_("Status"),
        label={
            RunStatus.PENDING: "info",
            RunStatus.RUNNING: "warning",
            RunStatus.CONVERGED: "success",
            RunStatus.FAILED: "danger",
        },
    )
    def display_status(self, instance):
        return instance.status


@admin.register(ConvergenceRow)
class ConvergenceRowAdmin(ModelAdmin):
    """Convergence row admin."""

    list_display = [
        "display_header",
        "h",
        "display_e_inf",
        "display_e_l2",
        "order_inf",
        "order_l2",
        "iters",
        "display_failed",
    ]
    list_filter = ["failed"]
    ordering = ["run", "grid"]

    @display(description=_("Grid"), header=True)
    def display_header(self, instance):
        return [f"N={instance.grid}", str(instance.run)]

    @display(description=_("Max error"))
    def display_e_inf(self, instance):
        return _scientific(instance.e_inf)

    @display(description=_("L2 error"))
    def display_e_l2(self, instance):
        return _scientific(instance.e_l2)

    @display(
        description=_("Result"),
        label={
            True: "danger",
            False: "success",
        },
    )
    def display_failed(self, instance):
        return instance.failed
