from django.conf import settings
from django.utils.translation import gettext_lazy as _


def environment_callback(request):
    """Environment badge for the Unfold header; warns when Sentry is off in production."""
    if settings.DEBUG:
        return [_("Development"), "warning"]
    if not settings.SENTRY_DSN:
        return [_("Production (no error reporting)"), "danger"]
    return [_("Production"), "success"]
