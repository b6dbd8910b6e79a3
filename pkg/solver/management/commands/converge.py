from core.exceptions import ConvergenceError, KfbiError
from solver.cli import SolverCommand
from solver.models import ConvergenceRow
from solver.services.convergence import TABLE_HEADER, run_converge
from solver.services.writers import write_table


def _cell(value, digits=3):
    if value is None:
        return "-"
    return f"{value:.{digits}e}" if isinstance(value, float) else str(value)


class Command(SolverCommand):
    help = "Error table of a manufactured solution over a list of grids"

    command = "converge"
    flags = SolverCommand.flags + ("refine", "table")

    def run(self, config):
        rows = run_converge(config)
        if config.output.get("table"):
            write_table(rows, config.output["table"])

        self.stdout.write(" ".join(f"{name:>10}" for name in TABLE_HEADER))
        for row in rows:
            if row.failed:
                self.stdout.write(f"{row.grid:>10} FAILED {row.failure}")
                continue
            cells = [row.grid, row.h, row.e_inf, row.e_l2, row.order_inf, row.order_l2, row.iters]
            self.stdout.write(" ".join(f"{_cell(c):>10}" for c in cells))

        fields = {"table": [row.as_dict() for row in rows], "rows": rows}
        failed = [row for row in rows if row.failed]
        if failed:
            message = f"{len(failed)} of {len(rows)} grids failed; first: {failed[0].failure}"
            no_convergence = all(r.failure.startswith(ConvergenceError.reason) for r in failed)
            fields["failure"] = (ConvergenceError if no_convergence else KfbiError)(message)
        return fields

    def store_rows(self, run, fields):
        ConvergenceRow.objects.bulk_create(
            ConvergenceRow.from_error_row(run, row) for row in fields["rows"]
        )
