from django.utils.translation import gettext_lazy as _


def dashboard_callback(request, context):
    """Dashboard callback for Unfold admin."""
    context.update(
        {
            "navigation": [
                {
                    "title": _("Quick Stats"),
                    "items": [
                        {
                            "title": _("Solver Runs"),
                            "description": _("Runs recorded with --record"),
                            "value": _get_run_count(),
                            "icon": "play_circle",
                        },
                        {
                            "title": _("Converged"),
                            "description": _("Runs that reached the tolerance"),
                            "value": _get_run_count("CONVERGED"),
                            "icon": "check_circle",
                        },
                        {
                            "title": _("Failed"),
                            "description": _("Runs stopped by a solver error"),
                            "value": _get_run_count("FAILED"),
                            "icon": "error",
                        },
                    ],
                },
            ],
        }
    )
    return context


def _get_run_count(status=None):
    try:
        from solver.models import SolverRun

        runs = SolverRun.objects.all()
        if status:
            runs = runs.filter(status=status)
        return runs.count()
    except Exception:
        return 0
