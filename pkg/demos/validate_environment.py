"""Validate an inferred environment for real: venv, pip install, execute cells.

Needs the output of demos/build_fixture_bank.py (for the wheels and bank):

    python demos/build_fixture_bank.py demo-output
    python demos/validate_environment.py demo-output

The first validation installs the inferred range (toylib 2.0-3.0) and runs
the fixture notebook to completion.  The second deliberately shifts the pin
to toylib 1.0, before ``magic`` existed, and the failure classifies as an
environment-related ImportError.
"""

import pathlib
import sys

from envsniff.api_bank import load_bank
from envsniff.notebook_analysis import collect_usages, load_notebook
from envsniff.resolver import resolve
from envsniff.validation_harness import (
    EnvPlan,
    HarnessConfig,
    InstallStep,
    SubprocessRunner,
    plan_environment,
    run_validation,
)

REPO = pathlib.Path(__file__).resolve().parent.parent
NOTEBOOK = REPO / "fixtures" / "notebooks" / "version_shift.ipynb"


def describe(report) -> None:
    print(f"   install: {report.install.status}")
    if report.execution is not None:
        if report.execution.timed_out:
            print("   execution: timed out")
        elif report.execution.all_cells_ok:
            print("   execution: all cells ok")
        else:
            print(f"   execution: failed at cell {report.execution.failed_at_cell}")
    if report.error_class is not None:
        kind = "environment-related" if report.error_class.environment_related else "notebook-side"
        print(f"   error class: {report.error_class.display()} ({kind})")
    print()


def main() -> None:
    out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "demo-output").resolve()
    _, index = load_bank(str(out / "bank"))

    config = HarnessConfig(
        env_install_cmd=[
            "{env_python}", "-m", "pip", "install", "--quiet",
            "--no-index", "--find-links", str(out / "wheels"), "{specifiers}",
        ],
        time_budget_s=120,
    )
    runner = SubprocessRunner()
    line = f"{sys.version_info.major}.{sys.version_info.minor}"

    cells = load_notebook(NOTEBOOK.read_text(encoding="utf-8"))
    resolution = resolve(collect_usages(cells), index)
    plan = plan_environment(resolution, line, str(NOTEBOOK), time_budget=120)
    print(f"== validating the inferred environment: {plan.install_steps[0].specifiers}")
    describe(run_validation(plan, runner, config))

    shifted = EnvPlan(
        env_name="envsniff-demo-shifted",
        interpreter_line=line,
        install_steps=(InstallStep("shifted pin", ("toylib==1.0",)),),
        notebook_path=str(NOTEBOOK),
        time_budget=120,
    )
    print("== validating a deliberately shifted pin: toylib==1.0")
    describe(run_validation(shifted, runner, config))


if __name__ == "__main__":
    main()
