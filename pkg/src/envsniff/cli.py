"""Command-line entry point: bank construction, inference, validation, diffing."""

from __future__ import annotations

import json
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import click

from . import __version__
from .api_bank import (
    CorruptBank,
    diff_releases,
    load_bank,
    load_release,
    merge_into_bank,
    normalize_name,
    release_record_path,
    version_sort_key,
)
from .notebook_analysis import MalformedNotebook, collect_usages, load_notebook
from .release_ingest import (
    DEFAULT_INDEX_BASE,
    EmptyRelease,
    IndexUnavailable,
    IngestDegraded,
    UnknownLibrary,
    ingest_release,
    list_releases,
)
from .resolver import EmptyBank, ResolvePolicy, emit_pipfile, emit_requirements, resolve
from .validation_harness import (
    EnvPlan,
    ExecutorUnavailable,
    HarnessConfig,
    InstallStep,
    SubprocessRunner,
    run_validation,
)

EXIT_OK = 0
EXIT_HARD_ERROR = 1
EXIT_PARTIAL = 2


@dataclass
class CliConfig:
    bank_dir: str
    cache_dir: str
    index_base_url: str
    harness: HarnessConfig
    output_format: str = "requirements"
    pin_latest: bool = False
    include_star_imports: bool = False
    allow_empty: bool = False
    parallelism: int = 1


@click.group()
@click.version_option(__version__)
@click.option(
    "--bank",
    "bank_dir",
    envvar="ENVSNIFF_BANK",
    default="./api-bank",
    show_default=True,
    help="API bank directory (env: ENVSNIFF_BANK).",
)
@click.option("--cache", "cache_dir", default="./release-cache", show_default=True)
@click.option("--index-url", default=DEFAULT_INDEX_BASE, show_default=True)
@click.option("--config", "config_path", type=click.Path(exists=True), default=None,
              help="JSON config file for the validation harness.")
@click.pass_context
def main(ctx: click.Context, bank_dir: str, cache_dir: str, index_url: str, config_path: str | None) -> None:
    """Infer and validate notebook execution environments from static analysis."""
    harness = HarnessConfig.from_file(config_path) if config_path else HarnessConfig()
    ctx.obj = CliConfig(
        bank_dir=bank_dir,
        cache_dir=cache_dir,
        index_base_url=index_url,
        harness=harness,
        parallelism=harness.parallelism,
    )


@main.group()
def bank() -> None:
    """Build and extend the API bank."""


def _select_versions(refs, selector: str):
    if selector == "all":
        return refs
    if selector.startswith("latest:"):
        count = int(selector.split(":", 1)[1])
        return refs[-count:] if count > 0 else []
    wanted = {v.strip() for v in selector.split(",") if v.strip()}
    return [ref for ref in refs if ref.version in wanted]


@bank.command("add")
@click.argument("libraries", nargs=-1, required=True)
@click.option("--versions", "selector", default="all", show_default=True,
              help='Version selector: "all", "latest:N", or a comma list.')
@click.option("--parallel", type=int, default=4, show_default=True)
@click.pass_obj
def bank_add(config: CliConfig, libraries: tuple[str, ...], selector: str, parallel: int) -> None:
    """Ingest releases of LIBRARIES from the package index into the bank."""
    ingested = []
    unindexed: list[str] = []
    statuses: list[str] = []

    work = []
    for library in libraries:
        skipped: list[tuple[str, str]] = []
        try:
            refs = list_releases(library, config.index_base_url, skipped)
        except UnknownLibrary:
            unindexed.append(library)
            statuses.append(f"{library}: not found on the index")
            continue
        except IndexUnavailable as exc:
            statuses.append(f"{library}: index unavailable ({exc})")
            continue
        for version, reason in skipped:
            statuses.append(f"{library} {version}: skipped ({reason})")
        work.extend(_select_versions(refs, selector))

    def ingest_one(ref):
        record_path = release_record_path(config.bank_dir, ref.library, ref.version)
        if os.path.exists(record_path):
            return ref, "skipped (cached)", None
        try:
            return ref, "ingested", ingest_release(ref, config.cache_dir)
        except (IngestDegraded, EmptyRelease, Exception) as exc:  # noqa: BLE001
            return ref, f"failed ({exc})", None

    cached = 0
    with ThreadPoolExecutor(max_workers=max(1, parallel)) as pool:
        for ref, status, release in pool.map(ingest_one, work):
            statuses.append(f"{ref.library} {ref.version}: {status}")
            if release is not None:
                ingested.append(release)
            elif status.startswith("skipped (cached)"):
                cached += 1

    if ingested:
        index = merge_into_bank(ingested, config.bank_dir)
        statuses.append(
            f"bank now holds {index.release_count} release(s), {index.api_count} API(s)"
        )

    for line in statuses:
        click.echo(line)
    if unindexed:
        click.echo("unindexed_modules: " + ", ".join(sorted(unindexed)))
    if not ingested and not cached:
        raise SystemExit(EXIT_HARD_ERROR)


def _discover_notebooks(path: str) -> list[str]:
    if os.path.isfile(path):
        return [path]
    found: list[str] = []
    for dirpath, dirnames, filenames in os.walk(path):
        dirnames[:] = [d for d in dirnames if d != ".ipynb_checkpoints"]
        for filename in filenames:
            if filename.endswith(".ipynb"):
                found.append(os.path.join(dirpath, filename))
    return sorted(found)


def _output_paths(notebook_path: str, output_dir: str | None, batch: bool) -> tuple[str, str]:
    if output_dir is None:
        base = os.path.dirname(os.path.abspath(notebook_path))
        return os.path.join(base, "requirements.txt"), os.path.join(base, "Pipfile")
    os.makedirs(output_dir, exist_ok=True)
    if batch:
        stem = os.path.splitext(os.path.basename(notebook_path))[0]
        return (
            os.path.join(output_dir, f"{stem}.requirements.txt"),
            os.path.join(output_dir, f"{stem}.Pipfile"),
        )
    return os.path.join(output_dir, "requirements.txt"), os.path.join(output_dir, "Pipfile")


@main.command()
@click.argument("path", type=click.Path(exists=True))
@click.option("-o", "--output-dir", default=None, help="Write dependency files here instead of next to the notebook.")
@click.option("--format", "output_format", type=click.Choice(["requirements", "pipfile", "both"]),
              default="requirements", show_default=True)
@click.option("--pin-latest", is_flag=True, help="Pin each library to the newest feasible version.")
@click.option("--include-star-imports", is_flag=True,
              help="Let low-confidence star-import usages participate in resolution.")
@click.option("--explain", is_flag=True, help="Print the per-usage diagnostics trace.")
@click.option("--parallel", type=int, default=1, show_default=True)
@click.pass_obj
def infer(
    config: CliConfig,
    path: str,
    output_dir: str | None,
    output_format: str,
    pin_latest: bool,
    include_star_imports: bool,
    explain: bool,
    parallel: int,
) -> None:
    """Infer dependency files for a notebook (or every notebook under a directory).

    The bank is read-only here; inference never touches the network.
    Exit status: 0 when every usage resolved, 2 on a partial result,
    1 on a hard error.
    """
    try:
        _, index = load_bank(config.bank_dir)
    except (CorruptBank, FileNotFoundError, OSError) as exc:
        click.echo(f"error: cannot load bank from {config.bank_dir}: {exc}", err=True)
        raise SystemExit(EXIT_HARD_ERROR)

    policy = ResolvePolicy(
        include_star_imports=include_star_imports, pin_latest=pin_latest
    )
    notebooks = _discover_notebooks(path)
    batch = len(notebooks) > 1 or os.path.isdir(path)

    def process(notebook_path: str) -> tuple[str, int, str]:
        try:
            with open(notebook_path, "rb") as handle:
                cells = load_notebook(handle.read())
            usages = collect_usages(cells, notebook_dir=os.path.dirname(os.path.abspath(notebook_path)))
            resolution = resolve(usages, index, policy)
        except (MalformedNotebook, EmptyBank, OSError) as exc:
            return notebook_path, EXIT_HARD_ERROR, f"error: {exc}"

        req_path, pip_path = _output_paths(notebook_path, output_dir, batch)
        if output_format in ("requirements", "both"):
            with open(req_path, "w", encoding="utf-8", newline="\n") as handle:
                handle.write(emit_requirements(resolution))
        if output_format in ("pipfile", "both"):
            with open(pip_path, "w", encoding="utf-8", newline="\n") as handle:
                handle.write(emit_pipfile(resolution))

        resolved_bits = []
        for version_range in resolution.resolved:
            constraint = version_range.emitted_constraint
            spec = constraint.specifier() if constraint else ""
            resolved_bits.append(version_range.library + (spec or " (any)"))
        summary = (
            f"{notebook_path}: {len(resolution.resolved)} librar(ies) "
            f"[{', '.join(resolved_bits)}], {len(resolution.unresolved_usages)} unresolved"
        )
        if explain:
            trace = {
                "usages": usages.to_report(),
                "diagnostics": [
                    {
                        "fqn": d.fqn,
                        "cell": d.cell_position,
                        "candidates": list(d.candidate_libraries),
                        "chosen": d.chosen_library,
                        "rule": d.choice_rule,
                        "eliminated": list(d.eliminated),
                    }
                    for d in resolution.diagnostics
                ],
                "unresolved": [
                    {"fqn": u.record.fqn, "reason": u.reason, "detail": u.detail}
                    for u in resolution.unresolved_usages
                ],
            }
            summary += "\n" + json.dumps(trace, indent=2, sort_keys=True)
        code = EXIT_OK if resolution.fully_resolved() else EXIT_PARTIAL
        return notebook_path, code, summary

    results: list[tuple[str, int, str]]
    if parallel > 1 and len(notebooks) > 1:
        with ThreadPoolExecutor(max_workers=parallel) as pool:
            results = list(pool.map(process, notebooks))
    else:
        results = [process(nb) for nb in notebooks]

    exit_code = EXIT_OK
    for _, code, summary in results:
        click.echo(summary)
        if code == EXIT_HARD_ERROR:
            exit_code = EXIT_HARD_ERROR
        elif code == EXIT_PARTIAL and exit_code != EXIT_HARD_ERROR:
            exit_code = EXIT_PARTIAL
    if not notebooks:
        click.echo("no notebooks found", err=True)
        exit_code = EXIT_HARD_ERROR
    raise SystemExit(exit_code)


def _plan_from_requirements(requirements_path: str, notebook_path: str, time_budget: int) -> EnvPlan:
    with open(requirements_path, "r", encoding="utf-8") as handle:
        specifiers = tuple(
            sorted(
                line.strip()
                for line in handle
                if line.strip() and not line.strip().startswith("#")
            )
        )
    steps = (
        (InstallStep(description=f"install {len(specifiers)} specifier(s)", specifiers=specifiers),)
        if specifiers
        else ()
    )
    import uuid

    return EnvPlan(
        env_name=f"envsniff-{uuid.uuid4().hex[:12]}",
        interpreter_line=f"{sys.version_info.major}.{sys.version_info.minor}",
        install_steps=steps,
        notebook_path=os.path.abspath(notebook_path),
        time_budget=time_budget,
    )


@main.command()
@click.argument("notebook", type=click.Path(exists=True))
@click.argument("requirements")
@click.option("--keep-env", is_flag=True)
@click.pass_obj
def validate(config: CliConfig, notebook: str, requirements: str, keep_env: bool) -> None:
    """Install REQUIREMENTS into a fresh environment and execute NOTEBOOK top-down."""
    if not os.path.isfile(requirements):
        click.echo(f"error: requirements file not found: {requirements}", err=True)
        raise SystemExit(EXIT_HARD_ERROR)
    plan = _plan_from_requirements(requirements, notebook, config.harness.time_budget_s)
    try:
        report = run_validation(plan, SubprocessRunner(), config.harness, keep_env=keep_env)
    except ExecutorUnavailable as exc:
        click.echo(f"error: executor unavailable: {exc}", err=True)
        raise SystemExit(EXIT_HARD_ERROR)

    click.echo(f"install: {report.install.status}")
    if report.install.matched_markers:
        click.echo("  markers: " + ", ".join(sorted(report.install.matched_markers)))
    if report.execution is not None:
        if report.execution.timed_out:
            click.echo("execution: timed out")
        elif report.execution.all_cells_ok:
            click.echo("execution: all cells ok")
        else:
            click.echo(f"execution: failed at cell {report.execution.failed_at_cell}")
    if report.error_class is not None:
        related = "environment-related" if report.error_class.environment_related else "notebook-side"
        click.echo(f"error class: {report.error_class.display()} ({related})")
    if report.traceback_excerpt:
        click.echo(report.traceback_excerpt)

    ok = (
        report.install.status == "success"
        and report.execution is not None
        and report.execution.all_cells_ok
    )
    raise SystemExit(EXIT_OK if ok else EXIT_PARTIAL)


@main.command()
@click.argument("library")
@click.argument("v1")
@click.argument("v2")
@click.pass_obj
def diff(config: CliConfig, library: str, v1: str, v2: str) -> None:
    """Print the API diff between two ingested releases of LIBRARY."""
    if version_sort_key(v2) < version_sort_key(v1):
        click.echo(f"notice: {v2} predates {v1}; swapping arguments")
        v1, v2 = v2, v1
    name = normalize_name(library)
    try:
        release_a = load_release(release_record_path(config.bank_dir, name, v1))
        release_b = load_release(release_record_path(config.bank_dir, name, v2))
    except (FileNotFoundError, CorruptBank) as exc:
        click.echo(f"error: release not in bank: {exc}", err=True)
        raise SystemExit(EXIT_HARD_ERROR)

    result = diff_releases(release_a, release_b)
    click.echo(
        f"{name} {v1} -> {v2}: "
        f"{len(result.added)} added, {len(result.removed)} removed, "
        f"{len(result.param_changed)} parameter-changed"
    )
    for label, names in (("added", result.added), ("removed", result.removed)):
        for fqn in sorted(names):
            click.echo(f"  {label}: {fqn}")
    for fqn, old, new in sorted(result.param_changed):
        click.echo(f"  changed: {fqn} {old} -> {new}")


if __name__ == "__main__":
    main()
