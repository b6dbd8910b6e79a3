import csv
import json
import logging

import numpy as np
from django.conf import settings
from django.core.exceptions import ValidationError

from .convergence import TABLE_HEADER

logger = logging.getLogger(__name__)


def _number(value):
    return f"{value:.17g}"


def write_field(field, classification, path, format="csv"):
    grid = field.grid
    if format == "vtk":
        _write_vtk(field, classification, path)
    else:
        with open(path, "w", newline="", encoding="utf-8") as stream:
            writer = csv.writer(stream)
            writer.writerow(["x", "y", "value", "inside"])
            for i in range(grid.I + 1):
                for j in range(grid.J + 1):
                    x, y = grid.node(i, j)
                    writer.writerow(
                        [
                            _number(x),
                            _number(y),
                            _number(field.values[i, j]),
                            int(classification.inside[i, j]),
                        ]
                    )
    logger.info("Wrote %s field to %s", format, path)


def _write_vtk(field, classification, path):
    grid = field.grid
    masked = np.where(classification.inside, field.values, np.nan)
    lines = [
        "# vtk DataFile Version 3.0",
        "KFBI solution",
        "ASCII",
        "DATASET STRUCTURED_POINTS",
        f"DIMENSIONS {grid.I + 1} {grid.J + 1} 1",
        f"ORIGIN {_number(grid.x_lo)} {_number(grid.y_lo)} 0",
        f"SPACING {_number(grid.h)} {_number(grid.h)} 1",
        f"POINT_DATA {(grid.I + 1) * (grid.J + 1)}",
        "SCALARS value double 1",
        "LOOKUP_TABLE default",
    ]
    # x varies fastest in VTK point order.
    lines.extend(
        " ".join("nan" if np.isnan(v) else _number(v) for v in masked[:, j])
        for j in range(grid.J + 1)
    )
    with open(path, "w", encoding="utf-8") as stream:
        stream.write("\n".join(lines) + "\n")


def read_field_csv(path):
    """Rows of (x, y, value, inside) as float arrays and a bool mask."""
    with open(path, newline="", encoding="utf-8") as stream:
        reader = csv.DictReader(stream)
        rows = list(reader)
    x = np.array([float(r["x"]) for r in rows])
    y = np.array([float(r["y"]) for r in rows])
    value = np.array([float(r["value"]) for r in rows])
    inside = np.array([r["inside"] == "1" for r in rows])
    return x, y, value, inside


def write_table(rows, path):
    with open(path, "w", newline="", encoding="utf-8") as stream:
        writer = csv.writer(stream)
        writer.writerow(TABLE_HEADER)
        for row in rows:
            if row.failed:
                writer.writerow([row.grid, _number(row.h), "FAILED", "FAILED", "", "", ""])
                continue
            writer.writerow(
                [
                    row.grid,
                    _number(row.h),
                    _number(row.e_inf),
                    _number(row.e_l2),
                    "" if row.order_inf is None else _number(row.order_inf),
                    "" if row.order_l2 is None else _number(row.order_l2),
                    row.iters,
                ]
            )
    logger.info("Wrote error table with %d rows to %s", len(rows), path)


def build_report(command, config, stats=None, wall_time=0.0, workers=1, table=None):
    return {
        "schema_version": settings.KFBI["REPORT_SCHEMA_VERSION"],
        "command": command,
        "config": config,
        "stats": stats,
        "wall_time": float(wall_time),
        "workers": int(workers),
        "table": table,
    }


def validate_report(report):
    from solver.forms import ReportForm

    form = ReportForm(data=report)
    if not form.is_valid():
        raise ValidationError(
            [f"report.{key}: {message}" for key, errors in form.errors.items() for message in errors]
        )
    return report


def write_report(report, path):
    validate_report(report)
    with open(path, "w", encoding="utf-8") as stream:
        json.dump(report, stream, indent=2, sort_keys=True)
        stream.write("\n")
    logger.info("Wrote run report to %s", path)


def write_classification(classification, path):
    with open(path, "w", newline="", encoding="utf-8") as stream:
        writer = csv.writer(stream)
        writer.writerow(["i", "j", "side", "irregular"])
        for i, j, side, irregular in classification.rows():
            writer.writerow([i, j, side, int(irregular)])
