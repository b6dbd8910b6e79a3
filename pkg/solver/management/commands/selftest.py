from core.exceptions import KfbiError
from solver.cli import SolverCommand
from solver.services.selftest import run_checks


class Command(SolverCommand):
    help = "Run the built-in checks of every solver module"

    command = "selftest"
    flags = ("report",)

    def run(self, config):
        results = run_checks()
        for name, passed, message in results:
            if passed:
                self.stdout.write(self.style.SUCCESS(f"PASS {name}"))
            else:
                self.stdout.write(self.style.ERROR(f"FAIL {name}: {message}"))

        failed = [name for name, passed, _message in results if not passed]
        fields = {
            "stats": {
                "checks": [
                    {"name": name, "passed": passed, "message": message}
                    for name, passed, message in results
                ]
            }
        }
        if failed:
            fields["failure"] = KfbiError(f"self test failed: {', '.join(failed)}")
        return fields
