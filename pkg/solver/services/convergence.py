import logging
import math
from dataclasses import asdict, dataclass

import numpy as np

from core.exceptions import KfbiError

from .bie import BvpSpec, solve
from .grid import build_grid

logger = logging.getLogger(__name__)

TABLE_HEADER = ("grid", "h", "e_inf", "e_l2", "order_inf", "order_l2", "iters")


@dataclass
class ErrorRow:
    grid: int
    h: float
    e_inf: float | None = None
    e_l2: float | None = None
    order_inf: float | None = None
    order_l2: float | None = None
    iters: int | None = None
    failure: str = ""

    @property
    def failed(self):
        return bool(self.failure)

    def as_dict(self):
        return asdict(self)


def solution_errors(solution, exact, grid):
    """Maximum and scaled l2 error over the interior nodes."""
    inside = solution.inside
    if not inside.any():
        return math.nan, math.nan
    error = np.abs(solution.field.values - exact.on_grid(grid))[inside]
    return float(error.max()), float(np.sqrt(np.mean(error**2)))


def observed_order(previous, current, ratio):
    if previous is None or current is None or previous <= 0 or current <= 0:
        return None
    return math.log(previous / current) / math.log(ratio)


def converge(boundary, box, sizes, exact, kappa, bc, options):
    """
    Solve the manufactured problem on every grid size; failed rows are kept
    with their reason and break the order chain.
    """
    rows = []
    previous = None
    for size in sizes:
        grid = build_grid(box, size, size)
        row = ErrorRow(grid=size, h=grid.h)
        try:
            spec = BvpSpec(
                kappa=kappa,
                bc=bc,
                boundary_data=exact.boundary_data(bc),
                boundary=boundary,
                grid=grid,
                source=exact.source(kappa),
                options=options,
            )
            solution = solve(spec)
        except KfbiError as exc:
            row.failure = f"{exc.reason}: {exc}"
            logger.warning("Grid %d failed: %s", size, row.failure)
            rows.append(row)
            previous = None
            continue

        row.e_inf, row.e_l2 = solution_errors(solution, exact, grid)
        row.iters = solution.stats.iterations
        if previous is not None:
            ratio = previous.h / row.h
            row.order_inf = observed_order(previous.e_inf, row.e_inf, ratio)
            row.order_l2 = observed_order(previous.e_l2, row.e_l2, ratio)
        logger.info(
            "Grid %d: e_inf=%.3e e_l2=%.3e order_inf=%s iters=%d",
            size,
            row.e_inf,
            row.e_l2,
            "-" if row.order_inf is None else f"{row.order_inf:.2f}",
            row.iters,
        )
        rows.append(row)
        previous = row
    return rows


def run_converge(config):
    """Error table for a parsed run configuration."""
    sizes = config.grid["refinements"] or [config.grid["n"]]
    return converge(
        config.boundary(),
        config.grid["box"],
        sizes,
        config.exact,
        config.kappa,
        config.bc,
        config.options(),
    )
