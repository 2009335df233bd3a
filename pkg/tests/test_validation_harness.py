from __future__ import annotations

import sys
from pathlib import Path

import pytest

from envsniff.api_bank import ApiRecord, ReleaseApiSet, build_index
from envsniff.notebook_analysis import CodeCell
from envsniff.resolver import Resolution, VersionRange, choose_emitted_constraint, resolve
from envsniff.validation_harness import (
    EnvPlan,
    ExecutorUnavailable,
    HarnessConfig,
    InstallStep,
    RunResult,
    SubprocessRunner,
    classify_install_log,
    classify_runtime_error,
    plan_environment,
    run_validation,
    write_cell_runner,
)
from fixturelib import FIXTURES, code_cell, notebook_document

LOGS = FIXTURES / "install_logs"

MODULE_NOT_FOUND_TB = """\
Traceback (most recent call last):
  File "<cell 0>", line 1, in <module>
ModuleNotFoundError: No module named 'sklearn.grid_search'
"""

IMPORT_ERROR_TB = """\
Traceback (most recent call last):
  File "<cell 2>", line 1, in <module>
ImportError: cannot import name 'scale_image' from 'astroquery.visualization'
"""


def simple_resolution(*entries) -> Resolution:
    resolution = Resolution()
    for library, feasible, known in entries:
        version_range = VersionRange(library, feasible, known)
        version_range.emitted_constraint = choose_emitted_constraint(version_range)
        resolution.resolved.append(version_range)
    return resolution


class TestPlanEnvironment:
    def test_exact_pin_passes_through(self):
        resolution = simple_resolution(("pandas", ("1.0",), ("1.0", "2.0")))
        plan = plan_environment(resolution, "3.10", "nb.ipynb")
        (step,) = plan.install_steps
        assert step.specifiers == ("pandas==1.0",)

    def test_empty_resolution_needs_allow_empty(self):
        with pytest.raises(ValueError):
            plan_environment(Resolution(), "3.10", "nb.ipynb")
        plan = plan_environment(Resolution(), "3.10", "nb.ipynb", allow_empty=True)
        assert plan.install_steps == ()

    def test_three_libraries_one_sorted_step(self):
        resolution = simple_resolution(
            ("zeta", ("1.0",), ("1.0",)),
            ("alpha", ("2.0",), ("2.0",)),
            ("midl", ("3.0",), ("3.0",)),
        )
        plan = plan_environment(resolution, "3.10", "nb.ipynb")
        (step,) = plan.install_steps
        assert step.specifiers == ("alpha==2.0", "midl==3.0", "zeta==1.0")

    def test_env_names_unique(self):
        resolution = simple_resolution(("pandas", ("1.0",), ("1.0",)))
        names = {
            plan_environment(resolution, "3.10", "nb.ipynb").env_name for _ in range(25)
        }
        assert len(names) == 25

    def test_time_budget_default_and_validation(self):
        resolution = simple_resolution(("pandas", ("1.0",), ("1.0",)))
        assert plan_environment(resolution, "3.10", "nb.ipynb").time_budget == 600
        with pytest.raises(ValueError):
            EnvPlan("e", "3.10", (), "nb.ipynb", time_budget=0)


class TestClassifyInstallLog:
    def test_generic_error_marker(self):
        outcome = classify_install_log("ERROR: No matching distribution", 1)
        assert outcome.status == "failure"
        assert outcome.matched_markers == {"generic_error"}

    def test_clean_log_success(self):
        outcome = classify_install_log("Successfully installed pandas-1.0.0", 0)
        assert outcome.status == "success"
        assert outcome.matched_markers == frozenset()

    def test_no_version_marker(self):
        outcome = classify_install_log("cannot find a version for torch", 1)
        assert outcome.matched_markers == {"no_version_found"}

    def test_installation_error_marker(self):
        outcome = classify_install_log("InstallationError: boom", 1)
        assert outcome.matched_markers == {"installation_error"}

    def test_nonzero_exit_without_marker_is_failure(self):
        assert classify_install_log("silent death", 7).status == "failure"

    def test_marker_scan_is_case_sensitive(self):
        assert classify_install_log("error: lowercase", 0).status == "success"

    def test_fixture_log_corpus_marker_completeness(self):
        expectations = {
            "clean.log": (0, "success", frozenset()),
            "generic_error.log": (1, "failure", {"generic_error"}),
            "installation_error.log": (1, "failure", {"installation_error"}),
            "no_version.log": (1, "failure", {"no_version_found"}),
        }
        for name, (exit_code, status, markers) in expectations.items():
            outcome = classify_install_log(
                (LOGS / name).read_text(encoding="utf-8"), exit_code
            )
            assert outcome.status == status, name
            assert outcome.matched_markers == frozenset(markers), name


class TestClassifyRuntimeError:
    def test_module_not_found(self):
        error = classify_runtime_error(MODULE_NOT_FOUND_TB)
        assert error.label == "ModuleNotFoundError"
        assert error.environment_related

    def test_import_error(self):
        error = classify_runtime_error(IMPORT_ERROR_TB)
        assert error.label == "ImportError"
        assert error.environment_related

    def test_empty_traceback(self):
        error = classify_runtime_error("")
        assert error.label == "unknown"
        assert not error.environment_related
        assert error.display() == "other(unknown)"

    def test_dotted_exception_path_uses_last_segment(self):
        error = classify_runtime_error(
            "Traceback (most recent call last):\n"
            "  ...\n"
            "requests.exceptions.HTTPError: 404 Client Error\n"
        )
        assert error.label == "HTTPError"
        assert not error.environment_related

    def test_chained_traceback_uses_last_exception(self):
        text = (
            "Traceback (most recent call last):\n"
            "KeyError: 'x'\n\n"
            "During handling of the above exception, another exception occurred:\n\n"
            "Traceback (most recent call last):\n"
            "FileNotFoundError: [Errno 2] No such file\n"
        )
        error = classify_runtime_error(text)
        assert error.label == "FileNotFoundError"

    def test_purity(self):
        assert classify_runtime_error(MODULE_NOT_FOUND_TB) == classify_runtime_error(
            MODULE_NOT_FOUND_TB
        )


class FakeExecutor:
    """Scripted executor: pops one RunResult per invocation."""

    def __init__(self, results):
        self.results = list(results)
        self.invocations: list[list[str]] = []

    def run(self, argv, timeout=None, env=None):
        self.invocations.append(list(argv))
        return self.results.pop(0)


def plan_for(tmp_path, specifiers=("toylib==1.0",)) -> EnvPlan:
    nb = tmp_path / "nb.ipynb"
    nb.write_text(notebook_document([code_cell("x = 1\n", 1)]))
    steps = (InstallStep("install", tuple(specifiers)),) if specifiers else ()
    return EnvPlan("envsniff-test0001", "3.10", steps, str(nb), time_budget=30)


class TestRunValidation:
    def test_successful_run(self, tmp_path):
        executor = FakeExecutor(
            [
                RunResult(0, "created"),
                RunResult(0, "Successfully installed toylib-1.0"),
                RunResult(0, "@@ENVSNIFF CELL-OK 0\n@@ENVSNIFF DONE ok\n"),
            ]
        )
        report = run_validation(plan_for(tmp_path), executor)
        assert report.install.status == "success"
        assert report.execution.all_cells_ok
        assert report.error_class is None

    def test_install_failure_stops_before_execution(self, tmp_path):
        executor = FakeExecutor(
            [
                RunResult(0, "created"),
                RunResult(1, "ERROR: No matching distribution found for toylib==9.9"),
            ]
        )
        report = run_validation(plan_for(tmp_path), executor)
        assert report.install.status == "failure"
        assert report.install.matched_markers == {"generic_error"}
        assert report.execution is None
        assert executor.results == []  # nb_exec never consumed

    def test_failed_cell_classified(self, tmp_path):
        log = (
            "@@ENVSNIFF CELL-OK 0\n"
            "@@ENVSNIFF CELL-FAIL 1\n"
            "@@ENVSNIFF TRACEBACK-BEGIN\n" + MODULE_NOT_FOUND_TB + "\n"
            "@@ENVSNIFF TRACEBACK-END\n"
            "@@ENVSNIFF DONE fail\n"
        )
        executor = FakeExecutor(
            [RunResult(0, ""), RunResult(0, "ok"), RunResult(3, log)]
        )
        report = run_validation(plan_for(tmp_path), executor)
        assert report.execution.failed_at_cell == 1
        assert report.error_class.label == "ModuleNotFoundError"
        assert report.error_class.environment_related
        assert "sklearn.grid_search" in report.traceback_excerpt

    def test_timeout_has_no_error_class(self, tmp_path):
        executor = FakeExecutor(
            [RunResult(0, ""), RunResult(0, "ok"), RunResult(-1, "partial", timed_out=True)]
        )
        report = run_validation(plan_for(tmp_path), executor)
        assert report.execution.timed_out
        assert report.error_class is None

    def test_missing_executor(self, tmp_path):
        with pytest.raises(ExecutorUnavailable):
            run_validation(plan_for(tmp_path), None)

    def test_command_templates_expanded(self, tmp_path):
        executor = FakeExecutor(
            [RunResult(0, ""), RunResult(0, ""), RunResult(0, "@@ENVSNIFF DONE ok\n")]
        )
        plan = plan_for(tmp_path, specifiers=("alpha==1.0", "beta==2.0"))
        run_validation(plan, executor)
        create_argv, install_argv, exec_argv = executor.invocations
        assert create_argv[:3] == [sys.executable, "-m", "venv"]
        assert install_argv[-2:] == ["alpha==1.0", "beta==2.0"]
        assert exec_argv[-1] == plan.notebook_path


class TestCellRunner:
    """Drive the generated standalone runner with a real subprocess."""

    def _config(self) -> HarnessConfig:
        # current interpreter stands in for the target environment
        return HarnessConfig(
            env_create_cmd=[sys.executable, "-c", "pass"],
            env_install_cmd=[sys.executable, "-c", "pass", "{specifiers}"],
            nb_exec_cmd=[sys.executable, "{runner}", "{notebook}"],
            env_python=sys.executable,
        )

    def test_all_cells_ok(self, tmp_path):
        nb = tmp_path / "ok.ipynb"
        nb.write_text(
            notebook_document(
                [
                    code_cell("import json\nx = json.dumps([1, 2])\n", 1),
                    code_cell("%matplotlib inline\ny = len(x)\n", 2),
                    code_cell("assert y > 0\n", 3),
                ]
            )
        )
        plan = EnvPlan("envsniff-real1", "3.10", (), str(nb), time_budget=60)
        report = run_validation(plan, SubprocessRunner(), self._config())
        assert report.install.status == "success"
        assert report.execution.all_cells_ok

    def test_failing_cell_reported_with_position(self, tmp_path):
        nb = tmp_path / "fail.ipynb"
        nb.write_text(
            notebook_document(
                [
                    code_cell("x = 1\n", 1),
                    code_cell("import module_that_does_not_exist_xyz\n", 2),
                    code_cell("print('never reached')\n", 3),
                ]
            )
        )
        plan = EnvPlan("envsniff-real2", "3.10", (), str(nb), time_budget=60)
        report = run_validation(plan, SubprocessRunner(), self._config())
        assert report.execution.failed_at_cell == 1
        assert report.error_class.label == "ModuleNotFoundError"
        assert report.error_class.environment_related

    def test_time_budget_enforced(self, tmp_path):
        nb = tmp_path / "sleep.ipynb"
        nb.write_text(
            notebook_document([code_cell("import time\ntime.sleep(30)\n", 1)])
        )
        plan = EnvPlan("envsniff-real3", "3.10", (), str(nb), time_budget=1)
        report = run_validation(plan, SubprocessRunner(), self._config())
        assert report.execution.timed_out
        assert report.error_class is None

    def test_runner_file_written(self, tmp_path):
        path = write_cell_runner(str(tmp_path))
        assert Path(path).name == "envsniff_cellrunner.py"
        compile(Path(path).read_text(), path, "exec")


class TestEndToEndShift:
    """Inference plus harness classification over the toylib fixture bank."""

    def test_shifted_pin_would_fail_with_environment_error(self, toylib_index, tmp_path):
        from envsniff.notebook_analysis import collect_usages, load_notebook

        notebook = FIXTURES / "notebooks" / "version_shift.ipynb"
        cells = load_notebook(notebook.read_text(encoding="utf-8"))
        resolution = resolve(collect_usages(cells), toylib_index)
        (version_range,) = resolution.resolved
        assert version_range.feasible == ("2.0", "3.0")
