"""Acceptance suite: one test per release criterion, at stated tolerances.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS line per
criterion.  Every expected value here is either a hand-verified fixture
fact or computed by an independent oracle (exhaustive enumeration, the
external requirement-specifier grammar, a live interpreter probe).
"""

from __future__ import annotations

import json
import random
import sys
import time

import pytest
from packaging.requirements import Requirement

from envsniff.api_bank import ApiRecord, CallSignature, ReleaseApiSet, build_index, load_bank, save_bank
from envsniff.notebook_analysis import (
    CodeCell,
    collect_usages,
    load_notebook,
    trace_instance_calls,
)
from envsniff.release_ingest import ingest_source_tree
from envsniff.resolver import ResolvePolicy, emit_pipfile, emit_requirements, resolve
from envsniff.validation_harness import (
    EnvPlan,
    HarnessConfig,
    InstallStep,
    SubprocessRunner,
    classify_install_log,
    classify_runtime_error,
    run_validation,
)
from fixturelib import (
    FIXTURES,
    PANDAS_REEXPORT,
    brute_force_feasible,
    code_cell,
    notebook_document,
    random_bank,
)

CANONICAL_READ_EXCEL = "pandas.io.excel._base.read_excel"


def _ok(name: str) -> None:
    print(f"ACCEPTANCE PASS: {name}")


def test_enhanced_tree_alias_reproduction():
    started = time.perf_counter()
    release = ingest_source_tree(str(PANDAS_REEXPORT), "pandas", "1.0.0")
    elapsed = time.perf_counter() - started
    assert release.alias_map == {
        "pandas.read_excel": CANONICAL_READ_EXCEL,
        "pandas.io.api.read_excel": CANONICAL_READ_EXCEL,
    }
    assert elapsed < 1.0, f"ingestion took {elapsed:.3f}s"
    _ok("enhanced-tree alias set reproduced exactly, under 1 s")


def test_instance_call_standardization():
    cells = [CodeCell(0, 1, "from x import y\nm = y()\nm.fun()")]
    traced = trace_instance_calls(cells)
    assert [u.fqn for u in traced] == ["x.y.fun"]
    _ok("instance method call standardized to x.y.fun")


def test_alias_and_module_form_standardization():
    cells = [CodeCell(0, 1, 'from pandas import read_excel as re\nre("f.xlsx")')]
    (usage,) = collect_usages(cells).usages
    assert usage.fqn == "pandas.read_excel"

    cells = [CodeCell(0, 1, 'from pandas.io.excel import _base\n_base.read_excel("f.xlsx")')]
    (usage,) = collect_usages(cells).usages
    assert usage.fqn == CANONICAL_READ_EXCEL
    _ok("alias and from-import forms standardized exactly")


def _random_usage_sets(rng, surface):
    from envsniff.notebook_analysis import UsageRecord, UsageSet

    records = []
    position = 0
    for library, versions in sorted(surface.items()):
        names = sorted({fqn for apis in versions.values() for fqn in apis})
        rng.shuffle(names)
        for fqn in names[: rng.randint(1, len(names))]:
            kw_pool = sorted(
                {k for apis in versions.values() for k in apis.get(fqn, ())}
            )
            keywords = tuple(kw_pool[: rng.randint(0, len(kw_pool))])
            records.append(
                UsageRecord(fqn, CallSignature(1, keywords), position, "alias_call")
            )
            position += 1
    return UsageSet(
        usages=frozenset(records),
        imported_top_levels=frozenset(r.fqn.split(".")[0] for r in records),
    )


def test_resolver_matches_exhaustive_enumeration():
    started = time.perf_counter()
    rng = random.Random(424242)
    banks_checked = 0
    ranges_checked = 0
    while banks_checked < 20:
        releases, surface = random_bank(rng, max_libraries=5, max_versions=8)
        index = build_index(releases)
        usages = _random_usage_sets(rng, surface)
        if not usages.usages:
            continue
        resolution = resolve(usages, index)
        for version_range in resolution.resolved:
            covered = resolution.covered[version_range.library]
            expected = brute_force_feasible(surface[version_range.library], covered)
            assert set(version_range.feasible) == expected, version_range.library
            ranges_checked += 1
        banks_checked += 1
    elapsed = time.perf_counter() - started
    assert elapsed < 30.0, f"suite took {elapsed:.1f}s"
    _ok(
        f"resolver feasible sets equal brute force on {banks_checked} banks "
        f"({ranges_checked} ranges), in {elapsed:.2f}s"
    )


def test_resolved_ranges_are_maximal():
    rng = random.Random(31337)
    adjacent_checked = 0
    for _ in range(20):
        releases, surface = random_bank(rng, max_libraries=5, max_versions=8)
        index = build_index(releases)
        usages = _random_usage_sets(rng, surface)
        if not usages.usages:
            continue
        resolution = resolve(usages, index)
        for version_range in resolution.resolved:
            covered = resolution.covered[version_range.library]
            known = version_range.known_versions
            feasible = set(version_range.feasible)
            for i, version in enumerate(known):
                if version in feasible:
                    continue
                neighbours = set()
                if i > 0:
                    neighbours.add(known[i - 1])
                if i + 1 < len(known):
                    neighbours.add(known[i + 1])
                if not (neighbours & feasible):
                    continue  # not adjacent to the resolved range
                # adding this version must break coverage
                satisfied = brute_force_feasible(
                    {version: surface[version_range.library][version]}, covered
                )
                assert satisfied == set(), (version_range.library, version)
                adjacent_checked += 1
    assert adjacent_checked >= 10
    _ok(f"maximality: {adjacent_checked} adjacent excluded versions all break coverage")


def test_emitters_conform_to_independent_grammar():
    releases = [
        ReleaseApiSet("pandas", v, frozenset({ApiRecord("pandas.read_excel", "function", ("io",))}))
        for v in ("0.9", "1.0")
    ] + [
        ReleaseApiSet("scipy", "1.17.5", frozenset({ApiRecord("scipy.optimize.minimize", "function", ("f",))})),
        ReleaseApiSet("scipy", "1.18.0", frozenset({ApiRecord("scipy.optimize.other", "function", ("f",))})),
        ReleaseApiSet("sklearn", "0.22.0", frozenset({ApiRecord("sklearn.svm.OldSVC", "class")})),
        ReleaseApiSet("sklearn", "0.23.0", frozenset({ApiRecord("sklearn.svm.SVC", "class")})),
        ReleaseApiSet("sklearn", "0.24.0", frozenset({ApiRecord("sklearn.svm.SVC", "class")})),
    ]
    index = build_index(releases)
    from envsniff.notebook_analysis import UsageRecord, UsageSet

    usages = UsageSet(
        usages=frozenset(
            {
                UsageRecord("pandas.read_excel", CallSignature(1), 0, "alias_call"),
                UsageRecord("scipy.optimize.minimize", CallSignature(1), 1, "alias_call"),
                UsageRecord("sklearn.svm.SVC", CallSignature(0), 2, "alias_call"),
            }
        ),
        imported_top_levels=frozenset({"pandas", "scipy", "sklearn"}),
    )
    resolution = resolve(usages, index)
    text = emit_requirements(resolution)
    lines = [l for l in text.splitlines() if l and not l.startswith("#")]
    assert lines == ["pandas", "scipy==1.17.5", "sklearn>=0.23.0"]

    # round-trip through the independent requirement-specifier grammar
    by_name = {}
    for line in lines:
        requirement = Requirement(line)
        by_name[requirement.name] = requirement.specifier
    assert str(by_name["pandas"]) == ""
    assert by_name["scipy"].contains("1.17.5") and not by_name["scipy"].contains("1.18.0")
    assert by_name["sklearn"].contains("0.23.0") and by_name["sklearn"].contains("0.24.0")
    assert not by_name["sklearn"].contains("0.22.0")

    pipfile = emit_pipfile(resolution)
    assert 'pandas = "*"' in pipfile
    assert 'scipy = "==1.17.5"' in pipfile
    assert 'sklearn = ">=0.23.0"' in pipfile

    # bounded-interval shape round-trips too
    releases_interval = [
        ReleaseApiSet("lib", v, frozenset({ApiRecord("lib.f", "function", ("x",))}))
        for v in ("1.0", "2.0")
    ] + [
        ReleaseApiSet("lib", "3.0", frozenset({ApiRecord("lib.g", "function", ("x",))})),
        ReleaseApiSet("lib", "0.5", frozenset({ApiRecord("lib.h", "function", ("x",))})),
    ]
    usages_interval = UsageSet(
        usages=frozenset({UsageRecord("lib.f", CallSignature(1), 0, "alias_call")}),
        imported_top_levels=frozenset({"lib"}),
    )
    bounded = resolve(usages_interval, build_index(releases_interval))
    line = [
        l
        for l in emit_requirements(bounded).splitlines()
        if l and not l.startswith("#")
    ][0]
    assert line == "lib>=1.0,<=2.0"
    specifier = Requirement(line).specifier
    assert specifier.contains("1.0") and specifier.contains("2.0")
    assert not specifier.contains("0.5") and not specifier.contains("3.0")
    _ok("emitted constraints reproduce all three shapes and round-trip the grammar")


def test_outcome_classifiers_are_exact():
    logs = FIXTURES / "install_logs"
    expectations = {
        "clean.log": (0, "success", frozenset()),
        "generic_error.log": (1, "failure", frozenset({"generic_error"})),
        "installation_error.log": (1, "failure", frozenset({"installation_error"})),
        "no_version.log": (1, "failure", frozenset({"no_version_found"})),
    }
    errors = 0
    for name, (exit_code, status, markers) in expectations.items():
        outcome = classify_install_log((logs / name).read_text(encoding="utf-8"), exit_code)
        if outcome.status != status or outcome.matched_markers != markers:
            errors += 1
    assert errors == 0

    module_not_found = classify_runtime_error(
        "Traceback (most recent call last):\n"
        "  File \"<cell 0>\", line 1, in <module>\n"
        "ModuleNotFoundError: No module named 'sklearn.grid_search'\n"
    )
    import_error = classify_runtime_error(
        "Traceback (most recent call last):\n"
        "  File \"<cell 0>\", line 1, in <module>\n"
        "ImportError: cannot import name 'scale_image' from 'astroquery.visualization'\n"
    )
    assert module_not_found.label == "ModuleNotFoundError" and module_not_found.environment_related
    assert import_error.label == "ImportError" and import_error.environment_related
    _ok("install-log corpus classified with 0 errors; both reference tracebacks labeled")


def test_bank_round_trip_and_double_ingest(tmp_path):
    fixture_trees = [
        (str(PANDAS_REEXPORT), "pandas", "1.0.0"),
        *[
            (str(FIXTURES / "toylib" / version), "toylib", version)
            for version in ("1.0", "2.0", "3.0", "4.0")
        ],
        (str(FIXTURES / "brokenlib" / "1.0"), "brokenlib", "1.0"),
    ]
    releases = [ingest_source_tree(*spec) for spec in fixture_trees]

    # double-ingest identity
    for spec, release in zip(fixture_trees, releases):
        assert ingest_source_tree(*spec) == release

    index = build_index(releases)
    bank_dir = str(tmp_path / "bank")
    save_bank(releases, index, bank_dir)
    loaded_releases, loaded_index = load_bank(bank_dir)
    key = lambda r: (r.library, r.version)
    assert sorted(loaded_releases, key=key) == sorted(releases, key=key)
    assert loaded_index.entries == index.entries
    assert loaded_index.top_level == index.top_level
    assert (loaded_index.release_count, loaded_index.api_count) == (
        index.release_count,
        index.api_count,
    )
    _ok("save/load and double-ingest are identities on every fixture")


def _synthetic_bank_and_notebook(n_libraries=5, versions_per_library=10, cells=200):
    releases = []
    for lib_index in range(n_libraries):
        library = f"synlib{lib_index}"
        for v_index in range(versions_per_library):
            version = f"{v_index + 1}.0"
            records = set()
            for api_index in range(60):
                records.add(
                    ApiRecord(
                        f"{library}.mod{api_index % 6}.fn{api_index}",
                        "function",
                        positional_params=("x",),
                        keyword_params=frozenset({(f"opt{api_index}", True)}),
                    )
                )
            aliases = {
                f"{library}.fn{i}": f"{library}.mod{i % 6}.fn{i}" for i in range(10)
            }
            releases.append(
                ReleaseApiSet(library, version, frozenset(records), aliases)
            )
    rng = random.Random(7)
    cell_objects = []
    for lib_index in range(n_libraries):
        cell_objects.append(code_cell(f"import synlib{lib_index}\n", lib_index + 1))
    while len(cell_objects) < cells:
        lib_index = rng.randrange(n_libraries)
        api_index = rng.randrange(60)
        cell_objects.append(
            code_cell(
                f"synlib{lib_index}.mod{api_index % 6}.fn{api_index}(1, opt{api_index}=2)\n",
                len(cell_objects) + 1,
            )
        )
    return releases, notebook_document(cell_objects)


def test_inference_throughput_200_cells_50_releases():
    releases, document = _synthetic_bank_and_notebook()
    index = build_index(releases)
    assert index.release_count == 50

    started = time.perf_counter()
    cells = load_notebook(document)
    usages = collect_usages(cells)
    resolution = resolve(usages, index)
    requirements = emit_requirements(resolution)
    elapsed = time.perf_counter() - started

    assert len(cells) == 200
    assert len(resolution.resolved) == 5
    assert requirements.count("synlib") >= 5
    assert elapsed <= 1.0, f"inference took {elapsed:.3f}s"
    _ok(f"200-cell inference against 50-release bank in {elapsed:.3f}s (limit 1 s)")


@pytest.fixture(scope="module")
def toylib_bank_index():
    releases = [
        ingest_source_tree(str(FIXTURES / "toylib" / version), "toylib", version)
        for version in ("1.0", "2.0", "3.0", "4.0")
    ]
    return build_index(releases)


def test_version_shift_fault_injection(toylib_bank_index, fixture_wheels, tmp_path):
    notebook_path = FIXTURES / "notebooks" / "version_shift.ipynb"
    cells = load_notebook(notebook_path.read_text(encoding="utf-8"))
    resolution = resolve(collect_usages(cells), toylib_bank_index)
    (version_range,) = resolution.resolved
    assert version_range.library == "toylib"
    assert version_range.feasible == ("2.0", "3.0")
    constraint = version_range.emitted_constraint
    assert (constraint.low, constraint.high) == ("2.0", "3.0")

    # deliberately shift the pin below the introduction version and validate
    wheel_dir = fixture_wheels[("toylib", "1.0")][0].parent
    config = HarnessConfig(
        env_create_cmd=[sys.executable, "-m", "venv", "{env}"],
        env_install_cmd=[
            "{env_python}", "-m", "pip", "install", "--quiet",
            "--no-index", "--find-links", str(wheel_dir), "{specifiers}",
        ],
        nb_exec_cmd=["{env_python}", "{runner}", "{notebook}"],
        time_budget_s=120,
    )
    plan = EnvPlan(
        env_name="envsniff-shift",
        interpreter_line=f"{sys.version_info.major}.{sys.version_info.minor}",
        install_steps=(InstallStep("install shifted pin", ("toylib==1.0",)),),
        notebook_path=str(notebook_path),
        time_budget=120,
    )
    report = run_validation(plan, SubprocessRunner(), config)
    assert report.install.status == "success", report.install.raw_log_ref[-2000:]
    assert not report.execution.all_cells_ok
    assert report.error_class is not None
    assert report.error_class.environment_related
    assert report.error_class.label in ("ImportError", "ModuleNotFoundError")

    # and the inferred range really executes
    good_plan = EnvPlan(
        env_name="envsniff-good",
        interpreter_line=plan.interpreter_line,
        install_steps=(InstallStep("install inferred range", ("toylib>=2.0,<=3.0",)),),
        notebook_path=str(notebook_path),
        time_budget=120,
    )
    good_report = run_validation(good_plan, SubprocessRunner(), config)
    assert good_report.install.status == "success", good_report.install.raw_log_ref[-2000:]
    assert good_report.execution.all_cells_ok
    _ok("version-shift: range {2.0,3.0} inferred; shifted pin fails environment-related")
