"""Validate a resolution by actually installing it and executing the notebook.

The harness itself never shells out directly to a fixed tool: environment
creation, installation, and cell execution are external command templates
(``{env}``, ``{env_python}``, ``{notebook}``, ``{timeout}``, ``{runner}``,
``{specifiers}`` placeholders), so the same plan runs against virtualenvs,
conda, or a stub executor in tests.  Outcomes are classified with fixed
marker and exception tables; notebook-side failures are report content,
never harness errors.
"""

from __future__ import annotations

import json
import os
import re
import shutil
import subprocess
import sys
import tempfile
import uuid
from dataclasses import dataclass, field, replace

from .resolver import Resolution, _requirement_line

DEFAULT_TIME_BUDGET_S = 600

SUCCESS = "success"
FAILURE = "failure"

# Install-log failure markers, scanned case-sensitively as substrings.
INSTALL_MARKERS: dict[str, str] = {
    "installation_error": "InstallationError",
    "generic_error": "ERROR:",
    "no_version_found": "cannot find a version for",
}

# Exception classes caused by an inadequate environment rather than the
# notebook's own code or data.
ENVIRONMENT_RELATED_LABELS = frozenset({"ModuleNotFoundError", "ImportError"})

KNOWN_ERROR_LABELS = frozenset(
    {"ModuleNotFoundError", "ImportError", "FileNotFoundError", "NameError", "HTTPError"}
)


class ExecutorUnavailable(Exception):
    """The external command runner (or a command binary) is missing."""


@dataclass(frozen=True)
class InstallStep:
    description: str
    specifiers: tuple[str, ...] = ()


@dataclass(frozen=True)
class EnvPlan:
    """Pure data: what to create, install, and execute.  No side effects."""

    env_name: str
    interpreter_line: str
    install_steps: tuple[InstallStep, ...]
    notebook_path: str
    time_budget: int = DEFAULT_TIME_BUDGET_S

    def __post_init__(self) -> None:
        if self.time_budget <= 0:
            raise ValueError("time budget must be positive")


@dataclass(frozen=True)
class InstallOutcome:
    status: str
    matched_markers: frozenset[str] = frozenset()
    raw_log_ref: str = ""


@dataclass(frozen=True)
class ErrorClass:
    label: str
    environment_related: bool

    def display(self) -> str:
        return self.label if self.label in KNOWN_ERROR_LABELS else f"other({self.label})"


@dataclass(frozen=True)
class ExecutionOutcome:
    all_cells_ok: bool
    failed_at_cell: int | None = None
    timed_out: bool = False


@dataclass(frozen=True)
class ValidationReport:
    install: InstallOutcome
    execution: ExecutionOutcome | None = None
    error_class: ErrorClass | None = None
    traceback_excerpt: str = ""


@dataclass
class HarnessConfig:
    """External command templates plus harness limits (JSON-loadable)."""

    env_create_cmd: list[str] = field(
        default_factory=lambda: [sys.executable, "-m", "venv", "{env}"]
    )
    env_install_cmd: list[str] = field(
        default_factory=lambda: ["{env_python}", "-m", "pip", "install", "{specifiers}"]
    )
    nb_exec_cmd: list[str] = field(
        default_factory=lambda: ["{env_python}", "{runner}", "{notebook}"]
    )
    env_python: str = "{env}/bin/python"
    parallelism: int = 1
    time_budget_s: int = DEFAULT_TIME_BUDGET_S
    keep_env: bool = False

    @classmethod
    def from_file(cls, path: str) -> "HarnessConfig":
        with open(path, "r", encoding="utf-8") as handle:
            raw = json.load(handle)
        config = cls()
        for key in (
            "env_create_cmd",
            "env_install_cmd",
            "nb_exec_cmd",
            "env_python",
            "parallelism",
            "time_budget_s",
            "keep_env",
        ):
            if key in raw:
                setattr(config, key, raw[key])
        return config


@dataclass(frozen=True)
class RunResult:
    exit_code: int
    log: str
    timed_out: bool = False


class SubprocessRunner:
    """Default executor: runs argv lists as subprocesses, capturing output."""

    def run(self, argv: list[str], timeout: float | None = None, env: dict | None = None) -> RunResult:
        merged_env = dict(os.environ)
        if env:
            merged_env.update(env)
        try:
            completed = subprocess.run(
                argv,
                stdout=subprocess.PIPE,
                stderr=subprocess.STDOUT,
                timeout=timeout,
                env=merged_env,
            )
        except FileNotFoundError as exc:
            raise ExecutorUnavailable(f"command not found: {argv[0]}") from exc
        except subprocess.TimeoutExpired as exc:
            partial = exc.output.decode("utf-8", "replace") if exc.output else ""
            return RunResult(exit_code=-1, log=partial, timed_out=True)
        return RunResult(
            exit_code=completed.returncode,
            log=completed.stdout.decode("utf-8", "replace") if completed.stdout else "",
        )


def plan_environment(
    resolution: Resolution,
    interpreter_line: str,
    notebook_path: str,
    time_budget: int = DEFAULT_TIME_BUDGET_S,
    allow_empty: bool = False,
) -> EnvPlan:
    """Build the environment plan for one resolution.  Data only.

    The plan's implicit stages are create -> install -> execute top-down;
    all resolved specifiers install in one step, sorted by name.
    """
    specifiers = tuple(
        sorted(_requirement_line(version_range) for version_range in resolution.resolved)
    )
    if not specifiers and not allow_empty:
        raise ValueError("resolution is empty; pass allow_empty to plan anyway")
    steps: tuple[InstallStep, ...] = ()
    if specifiers:
        steps = (
            InstallStep(
                description=f"install {len(specifiers)} specifier(s)",
                specifiers=specifiers,
            ),
        )
    return EnvPlan(
        env_name=f"envsniff-{uuid.uuid4().hex[:12]}",
        interpreter_line=interpreter_line,
        install_steps=steps,
        notebook_path=notebook_path,
        time_budget=time_budget,
    )


def classify_install_log(log: str, exit_code: int) -> InstallOutcome:
    """Scan an install log for the failure markers (case-sensitive substrings)."""
    matched = frozenset(
        name for name, marker in INSTALL_MARKERS.items() if marker in log
    )
    status = SUCCESS if exit_code == 0 and not matched else FAILURE
    return InstallOutcome(status=status, matched_markers=matched)


_EXC_LINE_RE = re.compile(r"^\s*([A-Za-z_][\w.]*)\s*(?::|$)")
_EXC_SUFFIXES = ("Error", "Exception", "Warning", "Exit", "Interrupt", "Iteration")


def classify_runtime_error(traceback_text: str) -> ErrorClass:
    """Label a traceback by its last exception type name.

    Only the final segment of a dotted exception path is kept, so
    ``requests.exceptions.HTTPError`` classifies as ``HTTPError``.
    Unparseable input degrades to ``other("unknown")``.
    """
    label: str | None = None
    for line in traceback_text.splitlines():
        match = _EXC_LINE_RE.match(line)
        if not match:
            continue
        candidate = match.group(1).rsplit(".", 1)[-1]
        if candidate.endswith(_EXC_SUFFIXES):
            label = candidate
    if label is None:
        return ErrorClass(label="unknown", environment_related=False)
    return ErrorClass(
        label=label, environment_related=label in ENVIRONMENT_RELATED_LABELS
    )


# --- the standalone cell runner ---------------------------------------------
#
# Generated next to each validation run and executed by the target
# environment's interpreter; stdlib-only so it cannot perturb the
# environment under test.

_CELL_RUNNER_SOURCE = '''\
import json
import sys
import traceback

MARK = "@@ENVSNIFF"


def code_cells(doc):
    cells = doc.get("cells")
    if cells is None:
        cells = []
        for sheet in doc.get("worksheets", []):
            cells.extend(sheet.get("cells", []))
    out = []
    for cell in cells:
        if cell.get("cell_type") != "code":
            continue
        source = cell.get("source", cell.get("input", ""))
        if isinstance(source, list):
            source = "".join(source)
        out.append(source)
    return out


def strip_kernel_syntax(source):
    lines = source.split("\\n")
    first = next((i for i, l in enumerate(lines) if l.strip()), None)
    if first is not None and lines[first].lstrip().startswith("%%"):
        magic = lines[first].lstrip()[2:].split(None, 1)
        name = magic[0] if magic else ""
        if name in ("time", "timeit", "capture", "prun"):
            lines = lines[:first] + lines[first + 1:]
        else:
            return ""
    kept = []
    for line in lines:
        stripped = line.lstrip()
        if stripped.startswith("%") or stripped.startswith("!"):
            continue
        if stripped and stripped.rstrip().endswith("?") and "=" not in stripped:
            continue
        kept.append(line)
    return "\\n".join(kept)


def main():
    path = sys.argv[1]
    with open(path, "r") as handle:
        doc = json.load(handle)
    namespace = {"__name__": "__main__"}
    for position, source in enumerate(code_cells(doc)):
        cleaned = strip_kernel_syntax(source)
        if not cleaned.strip():
            print(MARK + " CELL-OK %d" % position)
            continue
        try:
            code = compile(cleaned, "<cell %d>" % position, "exec")
            exec(code, namespace)
        except BaseException:
            print(MARK + " CELL-FAIL %d" % position)
            print(MARK + " TRACEBACK-BEGIN")
            print(traceback.format_exc())
            print(MARK + " TRACEBACK-END")
            print(MARK + " DONE fail")
            sys.exit(3)
        print(MARK + " CELL-OK %d" % position)
    print(MARK + " DONE ok")


if __name__ == "__main__":
    main()
'''


def write_cell_runner(directory: str) -> str:
    path = os.path.join(directory, "envsniff_cellrunner.py")
    with open(path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(_CELL_RUNNER_SOURCE)
    return path


def _expand(template: list[str], values: dict[str, str], specifiers: tuple[str, ...] = ()) -> list[str]:
    argv: list[str] = []
    for part in template:
        if part == "{specifiers}":
            argv.extend(specifiers)
            continue
        for key, value in values.items():
            part = part.replace("{" + key + "}", value)
        argv.append(part)
    return argv


_CELL_FAIL_RE = re.compile(r"^@@ENVSNIFF CELL-FAIL (\d+)$", re.MULTILINE)
_TRACEBACK_RE = re.compile(
    r"@@ENVSNIFF TRACEBACK-BEGIN\n(.*?)@@ENVSNIFF TRACEBACK-END", re.DOTALL
)
_DONE_OK_RE = re.compile(r"^@@ENVSNIFF DONE ok$", re.MULTILINE)


def run_validation(
    plan: EnvPlan,
    executor,
    config: HarnessConfig | None = None,
    keep_env: bool | None = None,
) -> ValidationReport:
    """Execute the plan: create the environment, install, run cells top-down.

    Stops at the first failed cell or when the time budget expires; the
    environment is torn down afterwards unless ``keep_env``.  Everything the
    notebook does wrong comes back inside the report.
    """
    if executor is None:
        raise ExecutorUnavailable("no executor supplied")
    config = config or HarnessConfig()
    keep = config.keep_env if keep_env is None else keep_env

    workdir = tempfile.mkdtemp(prefix=f"{plan.env_name}-")
    env_dir = os.path.join(workdir, "env")
    values = {
        "env": env_dir,
        "env_python": config.env_python.replace("{env}", env_dir),
        "notebook": plan.notebook_path,
        "runner": write_cell_runner(workdir),
        "timeout": str(plan.time_budget),
        "interpreter_line": plan.interpreter_line,
    }

    try:
        create_result = executor.run(_expand(config.env_create_cmd, values))
        install_log = create_result.log
        if create_result.exit_code != 0:
            return ValidationReport(
                install=classify_install_log(install_log or "environment creation failed", create_result.exit_code)
            )

        for step in plan.install_steps:
            result = executor.run(
                _expand(config.env_install_cmd, values, specifiers=step.specifiers)
            )
            install_log += result.log
            outcome = classify_install_log(result.log, result.exit_code)
            if outcome.status == FAILURE:
                return ValidationReport(install=replace(outcome, raw_log_ref=install_log))

        install = InstallOutcome(status=SUCCESS, raw_log_ref=install_log)

        exec_result = executor.run(
            _expand(config.nb_exec_cmd, values), timeout=plan.time_budget
        )
        if exec_result.timed_out:
            return ValidationReport(
                install=install,
                execution=ExecutionOutcome(all_cells_ok=False, timed_out=True),
            )

        fail_match = _CELL_FAIL_RE.search(exec_result.log)
        if fail_match is None and _DONE_OK_RE.search(exec_result.log) and exec_result.exit_code == 0:
            return ValidationReport(
                install=install, execution=ExecutionOutcome(all_cells_ok=True)
            )

        traceback_match = _TRACEBACK_RE.search(exec_result.log)
        traceback_text = traceback_match.group(1) if traceback_match else exec_result.log
        excerpt = "\n".join(traceback_text.strip().splitlines()[-20:])
        return ValidationReport(
            install=install,
            execution=ExecutionOutcome(
                all_cells_ok=False,
                failed_at_cell=int(fail_match.group(1)) if fail_match else None,
            ),
            error_class=classify_runtime_error(traceback_text),
            traceback_excerpt=excerpt,
        )
    finally:
        if not keep:
            shutil.rmtree(workdir, ignore_errors=True)
