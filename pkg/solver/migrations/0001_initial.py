import django.db.models.deletion
import django_fsm
from django.db import migrations, models


class Migration(migrations.Migration):
    initial = True

    dependencies = []

    operations = [
        migrations.CreateModel(
            name="SolverRun",
            fields=[
                ("id", models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name="ID")),
                ("created_at", models.DateTimeField(auto_now_add=True, verbose_name="Created at")),
                ("modified_at", models.DateTimeField(auto_now=True, verbose_name="Modified at")),
                (
                    "command",
                    models.CharField(
                        choices=[
                            ("solve", "Solve"),
                            ("converge", "Convergence study"),
                            ("gray-scott", "Gray-Scott"),
                            ("selftest", "Self test"),
                        ],
                        max_length=20,
                        verbose_name="Command",
                    ),
                ),
                ("config", models.JSONField(default=dict, verbose_name="Configuration")),
                (
                    "status",
                    django_fsm.FSMField(
                        choices=[
                            ("PENDING", "Pending"),
                            ("RUNNING", "Running"),
                            ("CONVERGED", "Converged"),
                            ("FAILED", "Failed"),
                        ],
                        default="PENDING",
                        max_length=50,
                        verbose_name="Status",
                    ),
                ),
                ("scheme", models.CharField(blank=True, max_length=20, verbose_name="Scheme")),
                ("workers", models.PositiveIntegerField(default=1, verbose_name="Workers")),
                ("grid_size", models.PositiveIntegerField(blank=True, null=True, verbose_name="Grid size")),
                ("iterations", models.PositiveIntegerField(blank=True, null=True, verbose_name="Iterations")),
                ("relative_residual", models.FloatField(blank=True, null=True, verbose_name="Final residual")),
                ("wall_time", models.FloatField(blank=True, null=True, verbose_name="Wall time (s)")),
                ("report", models.JSONField(blank=True, null=True, verbose_name="Report")),
                ("started_at", models.DateTimeField(blank=True, null=True, verbose_name="Started at")),
                ("finished_at", models.DateTimeField(blank=True, null=True, verbose_name="Finished at")),
                ("error", models.TextField(blank=True, verbose_name="Error")),
            ],
            options={
                "verbose_name": "Solver Run",
                "verbose_name_plural": "Solver Runs",
                "ordering": ["-created_at"],
            },
        ),
        migrations.CreateModel(
            name="ConvergenceRow",
            fields=[
                ("id", models.BigAutoField(auto_created=True, primary_key=True, serialize=False, verbose_name="ID")),
                ("created_at", models.DateTimeField(auto_now_add=True, verbose_name="Created at")),
                ("modified_at", models.DateTimeField(auto_now=True, verbose_name="Modified at")),
                ("grid", models.PositiveIntegerField(verbose_name="Grid")),
                ("h", models.FloatField(verbose_name="Spacing")),
                ("e_inf", models.FloatField(blank=True, null=True, verbose_name="Max error")),
                ("e_l2", models.FloatField(blank=True, null=True, verbose_name="L2 error")),
                ("order_inf", models.FloatField(blank=True, null=True, verbose_name="Max-norm order")),
                ("order_l2", models.FloatField(blank=True, null=True, verbose_name="L2 order")),
                ("iters", models.PositiveIntegerField(blank=True, null=True, verbose_name="Iterations")),
                ("failed", models.BooleanField(default=False, verbose_name="Failed")),
                ("failure", models.TextField(blank=True, verbose_name="Failure")),
                (
                    "run",
                    models.ForeignKey(
                        on_delete=django.db.models.deletion.CASCADE,
                        related_name="rows",
                        to="solver.solverrun",
                        verbose_name="Run",
                    ),
                ),
            ],
            options={
                "verbose_name": "Convergence Row",
                "verbose_name_plural": "Convergence Rows",
                "ordering": ["run", "grid"],
                "unique_together": {("run", "grid")},
            },
        ),
    ]
