from solver.cli import SolverCommand
from solver.services.bie import BvpSpec, build_operator, solve
from solver.services.convergence import solution_errors
from solver.services.writers import write_classification, write_field


class Command(SolverCommand):
    help = "Solve one elliptic boundary value problem with a manufactured solution"

    command = "solve"

    def add_arguments(self, parser):
        super().add_arguments(parser)
        parser.add_argument(
            "--classification", help="CSV dump of the node classification (i, j, side, irregular)"
        )

    def handle(self, *args, **options):
        self.classification_path = options.get("classification")
        return super().handle(*args, **options)

    def run(self, config):
        boundary = config.boundary()
        grid = config.build_grid()
        exact = config.exact
        options = config.options()
        operator = build_operator(boundary, grid, config.kappa, options)
        spec = BvpSpec(
            kappa=config.kappa,
            bc=config.bc,
            boundary_data=exact.boundary_data(config.bc),
            boundary=boundary,
            grid=grid,
            source=exact.source(config.kappa),
            options=options,
        )
        solution = solve(spec, operator=operator)

        classification = operator.geometry.classification
        output = config.output
        if output.get("path"):
            write_field(solution.field, classification, output["path"], format=output["format"])
        if self.classification_path:
            write_classification(classification, self.classification_path)
        if config.solver.get("transcript") and config.workers > 1:
            operator.log.dump(config.solver["transcript"])

        e_inf, e_l2 = solution_errors(solution, exact, grid)
        stats = solution.stats
        self.stdout.write(
            f"N={grid.I} {stats.scheme} iterations={stats.iterations} "
            f"residual={stats.relative_residual:.3e} e_inf={e_inf:.6e} e_l2={e_l2:.6e}"
        )
        return {"stats": {**stats.as_dict(), "e_inf": e_inf, "e_l2": e_l2}}
