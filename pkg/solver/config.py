import logging
import tomllib
from dataclasses import dataclass, field
from pathlib import Path

from django.core.exceptions import ValidationError

from solver.forms import BLOCK_FORMS
from solver.services.arrowhead import balanced_sizes
from solver.services.bie import SolverOptions
from solver.services.geometry import build_boundary
from solver.services.grid import build_grid
from solver.services.manufactured import get_exact_solution
from solver.services.partition import MIN_SLAB_COLUMNS
from solver.services.timestepper import GrayScottParams

logger = logging.getLogger(__name__)

# Command-line flag -> (block, key).
FLAG_KEYS = {
    "grid": ("grid", "n"),
    "box": ("grid", "box"),
    "refine": ("grid", "refinements"),
    "domain": ("geometry", "domain"),
    "kappa": ("pde", "kappa"),
    "bc": ("pde", "bc"),
    "exact": ("pde", "exact"),
    "scheme": ("solver", "scheme"),
    "tol": ("solver", "tol"),
    "gamma": ("solver", "gamma"),
    "restart": ("solver", "restart"),
    "workers": ("solver", "workers"),
    "transcript": ("solver", "transcript"),
    "out": ("output", "path"),
    "report": ("output", "report"),
    "table": ("output", "table"),
    "format": ("output", "format"),
}

SHAPE_KEYS = {"circle": ("r",), "ellipse": ("ra", "rb"), "star": ("r", "c", "m")}


@dataclass
class RunConfig:
    command: str
    pde: dict = field(default_factory=dict)
    geometry: dict = field(default_factory=dict)
    grid: dict = field(default_factory=dict)
    solver: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)
    gray_scott: dict = field(default_factory=dict)

    def as_dict(self):
        return {
            "command": self.command,
            "pde": self.pde,
            "geometry": self.geometry,
            "grid": self.grid,
            "solver": self.solver,
            "output": self.output,
            "gray_scott": self.gray_scott,
        }

    @property
    def exact(self):
        return get_exact_solution(self.pde["exact"])

    @property
    def kappa(self):
        kappa = self.pde.get("kappa")
        return self.exact.kappa if kappa is None else kappa

    @property
    def bc(self):
        return self.pde.get("bc") or self.exact.bc

    @property
    def workers(self):
        return self.solver["workers"]

    def boundary(self):
        kind, _sep, raw = self.geometry["domain"].partition(":")
        values = [float(v) for v in raw.split(",") if v.strip()]
        return build_boundary(
            kind,
            dict(zip(SHAPE_KEYS[kind], values, strict=True)),
            center=self.geometry["center"],
            rotation=self.geometry["rotation"],
        )

    def build_grid(self, size=None):
        size = size or self.grid["n"]
        return build_grid(self.grid["box"], size, size)

    def options(self):
        return SolverOptions.from_settings(
            scheme=self.solver["scheme"],
            tolerance=self.solver["tol"],
            restart=self.solver["restart"],
            max_restarts=self.solver["max_restarts"],
            gamma=self.solver["gamma"],
            max_iterations=self.solver["max_iterations"],
            workers=self.solver["workers"],
        )

    def gray_scott_params(self):
        values = {k: v for k, v in self.gray_scott.items() if k in GrayScottParams.__dataclass_fields__ and v is not None}
        return GrayScottParams(**values)


def _read_toml(path):
    try:
        with open(path, "rb") as stream:
            return tomllib.load(stream)
    except tomllib.TOMLDecodeError as exc:
        raise ValidationError(f"{path}: {exc}", code="parse") from exc


def _parse_flag(block, key, value):
    if key == "box" and isinstance(value, str):
        try:
            return [float(v) for v in value.split(",")]
        except ValueError as exc:
            raise ValidationError(f"grid.box: cannot parse {value!r}", code="parse") from exc
    if key == "refinements" and isinstance(value, str):
        try:
            return [int(v) for v in value.split(",")]
        except ValueError as exc:
            raise ValidationError(f"grid.refinements: cannot parse {value!r}", code="parse") from exc
    return value


def parse_config(path=None, overrides=None, command="solve"):
    """
    Read a TOML run configuration, apply flag overrides and validate every
    block through its form. Raises ValidationError naming `block.key`.
    """
    raw = _read_toml(path) if path and Path(path).stat().st_size else {}
    unknown = sorted(set(raw) - set(BLOCK_FORMS))
    if unknown:
        raise ValidationError(f"Unknown config blocks: {', '.join(unknown)}", code="unknown")

    for flag, value in (overrides or {}).items():
        if value is None:
            continue
        block, key = FLAG_KEYS[flag]
        raw.setdefault(block, {})[key] = _parse_flag(block, key, value)

    cleaned, problems = {}, []
    for block, form_class in BLOCK_FORMS.items():
        data = raw.get(block, {})
        if not isinstance(data, dict):
            problems.append(f"{block}: must be a table")
            continue
        form = form_class(data=data)
        for key in sorted(set(data) - set(form.fields)):
            problems.append(f"{block}.{key}: unknown key")
        if not form.is_valid():
            for key, errors in form.errors.items():
                problems.extend(f"{block}.{key}: {message}" for message in errors)
            continue
        cleaned[block] = form.cleaned_data

    if not problems:
        sizes = [cleaned["grid"]["n"]] + cleaned["grid"]["refinements"]
        workers = cleaned["solver"]["workers"]
        for size in sizes:
            if min(balanced_sizes(size, workers)) < MIN_SLAB_COLUMNS:
                problems.append(
                    f"solver.workers: slab-too-small: {workers} workers on a {size} grid "
                    f"leave fewer than {MIN_SLAB_COLUMNS} columns per slab"
                )
                break

    if problems:
        raise ValidationError(problems, code="invalid")

    config = RunConfig(command=command, **cleaned)
    logger.debug("Parsed %s config: %s", command, config.as_dict())
    return config
