from django import forms
from django.conf import settings
from django.core.exceptions import ValidationError
from django.utils.translation import gettext_lazy as _

from solver.services.bie import BoundaryCondition, Scheme
from solver.services.geometry import BoundaryKind
from solver.services.manufactured import CATALOG
from solver.services.timestepper import Splitting


class FieldFormat:
    CSV = "csv"
    VTK = "vtk"
    CHOICES = [(CSV, "CSV"), (VTK, "VTK")]


def _numbers(value, label, count=None, integer=False):
    if not isinstance(value, list | tuple):
        raise ValidationError(_("%(label)s must be a list"), params={"label": label})
    if count is not None and len(value) != count:
        raise ValidationError(
            _("%(label)s needs %(count)d entries"), params={"label": label, "count": count}
        )
    kind = int if integer else (int, float)
    if not all(isinstance(v, kind) and not isinstance(v, bool) for v in value):
        raise ValidationError(_("%(label)s entries must be numbers"), params={"label": label})
    return [int(v) if integer else float(v) for v in value]


class PdeForm(forms.Form):
    kappa = forms.FloatField(label=_("Helmholtz kappa"), min_value=0, required=False)
    bc = forms.ChoiceField(label=_("Boundary condition"), choices=BoundaryCondition.choices, required=False)
    exact = forms.ChoiceField(
        label=_("Exact solution"),
        choices=[(name, name) for name in CATALOG],
        required=False,
    )

    def clean_exact(self):
        return self.cleaned_data["exact"] or "harmonic-exp"


class GeometryForm(forms.Form):
    domain = forms.CharField(label=_("Domain"), required=False)
    center = forms.JSONField(label=_("Center"), required=False)
    rotation = forms.FloatField(label=_("Rotation"), required=False)

    def clean_domain(self):
        text = self.cleaned_data["domain"] or "circle:1.0"
        kind, _sep, raw = text.partition(":")
        if kind not in BoundaryKind.values:
            raise ValidationError(
                _("Unknown domain kind %(kind)s; use circle, ellipse or star"),
                params={"kind": kind},
            )
        try:
            params = [float(v) for v in raw.split(",") if v.strip()]
        except ValueError as exc:
            raise ValidationError(_("Domain parameters must be numbers: %(text)s"), params={"text": text}) from exc
        expected = {"circle": 1, "ellipse": 2, "star": 3}[kind]
        if len(params) != expected:
            raise ValidationError(
                _("%(kind)s takes %(expected)d parameters"),
                params={"kind": kind, "expected": expected},
            )
        return text

    def clean_center(self):
        value = self.cleaned_data["center"]
        return [0.0, 0.0] if value is None else _numbers(value, "center", count=2)

    def clean_rotation(self):
        return self.cleaned_data["rotation"] or 0.0


class GridForm(forms.Form):
    box = forms.JSONField(label=_("Box"), required=False)
    n = forms.IntegerField(label=_("Cells per side"), min_value=4, required=False)
    refinements = forms.JSONField(label=_("Refinement grids"), required=False)

    def clean_box(self):
        value = self.cleaned_data["box"]
        if value is None:
            return [-1.2, 1.2, -1.2, 1.2]
        box = _numbers(value, "box", count=4)
        if box[1] <= box[0] or box[3] <= box[2]:
            raise ValidationError(_("box must be [x_lo, x_hi, y_lo, y_hi] with lo < hi"))
        if abs((box[1] - box[0]) - (box[3] - box[2])) > 1e-12:
            raise ValidationError(_("box must be square so both directions share the spacing"))
        return box

    def clean_n(self):
        return self.cleaned_data["n"] or 128

    def clean_refinements(self):
        value = self.cleaned_data["refinements"]
        if value is None:
            return []
        sizes = _numbers(value, "refinements", integer=True)
        if any(size < 4 for size in sizes):
            raise ValidationError(_("refinement grids need at least 4 cells"))
        return sizes


class SolverForm(forms.Form):
    scheme = forms.ChoiceField(label=_("Scheme"), choices=Scheme.choices, required=False)
    tol = forms.FloatField(label=_("Tolerance"), required=False)
    restart = forms.IntegerField(label=_("GMRES restart"), min_value=1, required=False)
    max_restarts = forms.IntegerField(label=_("GMRES restarts"), min_value=1, required=False)
    gamma = forms.FloatField(label=_("Richardson gamma"), required=False)
    max_iterations = forms.IntegerField(label=_("Richardson iterations"), min_value=1, required=False)
    workers = forms.IntegerField(label=_("Workers"), min_value=1, required=False)
    transcript = forms.CharField(label=_("Message transcript"), required=False)

    def clean_scheme(self):
        return self.cleaned_data["scheme"] or settings.KFBI["SCHEME"]

    def clean_tol(self):
        value = self.cleaned_data["tol"]
        if value is None:
            return settings.KFBI["TOLERANCE"]
        if value <= 0:
            raise ValidationError(_("tol must be positive"))
        return value

    def clean_gamma(self):
        value = self.cleaned_data["gamma"]
        if value is None:
            return settings.KFBI["GAMMA"]
        if not 0 < value <= 1:
            raise ValidationError(_("gamma must lie in (0, 1]"))
        return value

    def clean_restart(self):
        return self.cleaned_data["restart"] or settings.KFBI["RESTART"]

    def clean_max_restarts(self):
        return self.cleaned_data["max_restarts"] or settings.KFBI["MAX_RESTARTS"]

    def clean_max_iterations(self):
        return self.cleaned_data["max_iterations"] or settings.KFBI["MAX_RICHARDSON_ITERATIONS"]

    def clean_workers(self):
        return self.cleaned_data["workers"] or settings.KFBI["WORKERS"]


class OutputForm(forms.Form):
    path = forms.CharField(label=_("Field output"), required=False)
    report = forms.CharField(label=_("Report output"), required=False)
    table = forms.CharField(label=_("Error table output"), required=False)
    format = forms.ChoiceField(label=_("Field format"), choices=FieldFormat.CHOICES, required=False)
    snapshots = forms.JSONField(label=_("Snapshot times"), required=False)

    def clean_format(self):
        return self.cleaned_data["format"] or FieldFormat.CSV

    def clean_snapshots(self):
        value = self.cleaned_data["snapshots"]
        if value is None:
            return []
        times = _numbers(value, "snapshots")
        if any(t <= 0 for t in times):
            raise ValidationError(_("snapshot times must be positive"))
        return sorted(times)


class GrayScottForm(forms.Form):
    gamma = forms.FloatField(label=_("Feed rate"), required=False)
    kappa_r = forms.FloatField(label=_("Removal rate"), required=False)
    eps0 = forms.FloatField(required=False)
    eps1 = forms.FloatField(required=False)
    eps2 = forms.FloatField(required=False)
    dt = forms.FloatField(label=_("Time step"), required=False)
    t_end = forms.FloatField(label=_("End time"), required=False)
    steps = forms.IntegerField(label=_("Steps"), min_value=1, required=False)
    radius = forms.FloatField(label=_("Disk radius"), required=False)
    splitting = forms.ChoiceField(choices=Splitting.choices, required=False)

    def clean(self):
        cleaned = super().clean()
        for name in ("gamma", "kappa_r", "eps0", "eps1", "eps2", "dt", "t_end", "radius"):
            value = cleaned.get(name)
            if value is not None and value <= 0:
                self.add_error(name, _("must be positive"))
        cleaned["splitting"] = cleaned.get("splitting") or Splitting.STRANG
        return cleaned


class ReportForm(forms.Form):
    """Shape every run report must have."""

    schema_version = forms.CharField()
    command = forms.ChoiceField(
        choices=[(c, c) for c in ("solve", "converge", "gray-scott", "selftest")]
    )
    config = forms.JSONField()
    stats = forms.JSONField(required=False)
    wall_time = forms.FloatField(min_value=0)
    workers = forms.IntegerField(min_value=1)
    table = forms.JSONField(required=False)

    def clean_schema_version(self):
        value = self.cleaned_data["schema_version"]
        if value != settings.KFBI["REPORT_SCHEMA_VERSION"]:
            raise ValidationError(
                _("Unsupported report schema %(version)s"), params={"version": value}
            )
        return value

    def clean_config(self):
        value = self.cleaned_data["config"]
        if not isinstance(value, dict):
            raise ValidationError(_("config must be an object"))
        return value


BLOCK_FORMS = {
    "pde": PdeForm,
    "geometry": GeometryForm,
    "grid": GridForm,
    "solver": SolverForm,
    "output": OutputForm,
    "gray_scott": GrayScottForm,
}
