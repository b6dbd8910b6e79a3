from pathlib import Path

from solver.cli import SolverCommand
from solver.services.timestepper import default_geometry, run_gray_scott
from solver.services.writers import write_field


def snapshot_path(path, species, time):
    path = Path(path)
    return path.with_name(f"{path.stem}_{species}_t{time:g}{path.suffix}")


class Command(SolverCommand):
    help = "Gray-Scott reaction-diffusion on a disk with zero-flux boundary"

    command = "gray-scott"
    flags = ("grid", "scheme", "tol", "gamma", "restart", "workers", "out", "report", "format")

    def run(self, config):
        params = config.gray_scott_params()
        block = config.gray_scott
        radius = block.get("radius") or 1.8
        # The box keeps the disk 0.2 radius units from its edges.
        geometry = default_geometry(
            size=config.grid["n"], radius=radius, half_width=radius / 0.9
        )
        output = config.output
        final, snapshots = run_gray_scott(
            params,
            geometry=geometry,
            steps=block.get("steps"),
            snapshots=output["snapshots"],
            options=config.options(),
            splitting=block["splitting"],
        )

        inside = geometry.classification.inside
        if output.get("path"):
            for time, state in sorted(snapshots.items()):
                for species in ("u", "v"):
                    write_field(
                        getattr(state, species),
                        geometry.classification,
                        snapshot_path(output["path"], species, time),
                        format=output["format"],
                    )
            for species in ("u", "v"):
                write_field(
                    getattr(final, species),
                    geometry.classification,
                    snapshot_path(output["path"], species, final.time),
                    format=output["format"],
                )

        bounds = final.bounds(inside)
        self.stdout.write(
            f"t={final.time:g} u in [{bounds['u'][0]:.6f}, {bounds['u'][1]:.6f}] "
            f"v in [{bounds['v'][0]:.6f}, {bounds['v'][1]:.6f}]"
        )
        return {
            "stats": {
                "time": final.time,
                "steps": int(round(final.time / params.dt)),
                "splitting": str(block["splitting"]),
                "bounds": {name: list(pair) for name, pair in bounds.items()},
                "snapshots": sorted(snapshots),
            }
        }
