"""Turn extracted usages plus the API bank into installable dependency files.

For every usage the bank is queried for candidate (library, version) pairs;
usages are grouped onto a minimal covering set of libraries, and per library
the feasible versions are the intersection of the version sets supporting
each assigned usage.  A usage the bank cannot place never fails the whole
resolution: it is demoted to the unresolved list with an explanation and the
rest of the environment is still emitted.
"""

from __future__ import annotations

import importlib.metadata
from collections import defaultdict
from dataclasses import dataclass, field

from packaging.version import Version

from .api_bank import (
    ApiBankIndex,
    CallSignature,
    normalize_name,
    query,
    version_sort_key,
)
from .notebook_analysis import UsageRecord, UsageSet
from .stdlib_tables import TABLES

UNKNOWN_API = "unknown_api"
EMPTY_INTERSECTION = "empty_intersection"
AMBIGUOUS_LIBRARY = "ambiguous_library"

EXACT = "exact"
CLOSED_INTERVAL = "closed_interval"
ANY = "any"


class EmptyBank(Exception):
    """Resolution attempted against a bank with no releases."""


@dataclass(frozen=True)
class ResolvePolicy:
    include_star_imports: bool = False
    pin_latest: bool = False
    include_import_only: bool = True


@dataclass(frozen=True)
class Constraint:
    """Version constraint chosen for one library."""

    kind: str
    low: str | None = None
    high: str | None = None
    at_latest: bool = False
    at_oldest: bool = False

    def specifier(self) -> str:
        """PEP 440 specifier text; empty string for the any-version form."""
        if self.kind == ANY:
            return ""
        if self.kind == EXACT:
            return f"=={self.low}"
        if self.at_latest:
            return f">={self.low}"
        return f">={self.low},<={self.high}"


@dataclass
class VersionRange:
    """Feasible versions of one resolved library plus the emitted constraint."""

    library: str
    feasible: tuple[str, ...]
    known_versions: tuple[str, ...]
    emitted_constraint: Constraint | None = None
    warnings: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not self.feasible:
            raise ValueError(f"{self.library}: feasible set must be non-empty")


@dataclass(frozen=True)
class UnresolvedUsage:
    record: UsageRecord
    reason: str
    detail: str = ""


@dataclass(frozen=True)
class DiagnosticEntry:
    """Per-usage trace: candidates seen, choice made, versions eliminated."""

    fqn: str
    cell_position: int
    candidate_libraries: tuple[str, ...]
    chosen_library: str | None
    choice_rule: str
    eliminated: tuple[str, ...] = ()


@dataclass
class Resolution:
    resolved: list[VersionRange] = field(default_factory=list)
    unresolved_usages: list[UnresolvedUsage] = field(default_factory=list)
    diagnostics: list[DiagnosticEntry] = field(default_factory=list)
    covered: dict[str, tuple[UsageRecord, ...]] = field(default_factory=dict)
    bank_fingerprint: str = ""
    interpreter_hint: str = ""

    def fully_resolved(self) -> bool:
        return not self.unresolved_usages


def _usage_key(record: UsageRecord) -> tuple:
    call = record.call
    if isinstance(call, CallSignature):
        call_key = ("call", call.positional_count, call.keyword_names)
    else:
        call_key = ("ref", str(call))
    return (record.fqn, call_key)


def resolve(
    usages: UsageSet,
    index: ApiBankIndex,
    policy: ResolvePolicy = ResolvePolicy(),
) -> Resolution:
    """Compute a covering library set with maximal feasible version ranges.

    Tie-break order when several libraries could supply a usage: the
    library whose index name matches the usage's top-level module, then the
    library covering the most usages, then the lexicographically smallest.
    The output is a pure function of (usages, index, policy).
    """
    if index.release_count == 0:
        raise EmptyBank("the API bank holds no releases")

    resolution = Resolution(
        bank_fingerprint=f"{index.release_count} releases / {index.api_count} APIs",
    )
    if usages.stdlib_hints:
        lines = sorted({line for hints in usages.stdlib_hints.values() for line in hints})
        resolution.interpreter_hint = (
            "stdlib usage matched interpreter line(s) " + ", ".join(lines)
        )

    considered = [
        u
        for u in usages.usages
        if policy.include_star_imports or not u.low_confidence
    ]
    groups: dict[tuple, list[UsageRecord]] = defaultdict(list)
    for record in sorted(considered, key=lambda u: (u.cell_position, u.fqn)):
        groups[_usage_key(record)].append(record)

    hits_per_key: dict[tuple, dict[str, frozenset[str]]] = {}
    for key, records in groups.items():
        record = records[0]
        call = record.call if isinstance(record.call, CallSignature) else None
        per_library: dict[str, set[str]] = defaultdict(set)
        for library, version in query(index, record.fqn, call):
            per_library[library].add(version)
        if not per_library:
            for rec in records:
                resolution.unresolved_usages.append(
                    UnresolvedUsage(rec, UNKNOWN_API, "no release provides this name")
                )
            resolution.diagnostics.append(
                DiagnosticEntry(record.fqn, record.cell_position, (), None, UNKNOWN_API)
            )
            continue
        hits_per_key[key] = {lib: frozenset(vs) for lib, vs in per_library.items()}

    # --- assign each usage to one library (name match, then greedy cover) ---
    assigned: dict[str, list[tuple]] = defaultdict(list)
    pending: dict[tuple, tuple[str, ...]] = {}
    for key, per_library in sorted(hits_per_key.items()):
        candidates = tuple(sorted(per_library))
        root = normalize_name(key[0].split(".")[0])
        named = [lib for lib in candidates if normalize_name(lib) == root]
        if len(candidates) == 1:
            assigned[candidates[0]].append(key)
            rule = "single_candidate"
            chosen = candidates[0]
        elif named:
            assigned[named[0]].append(key)
            rule = "top_level_name_match"
            chosen = named[0]
        else:
            pending[key] = candidates
            continue
        record = groups[key][0]
        resolution.diagnostics.append(
            DiagnosticEntry(record.fqn, record.cell_position, candidates, chosen, rule)
        )

    while pending:
        coverage: dict[str, int] = defaultdict(int)
        for candidates in pending.values():
            for library in candidates:
                coverage[library] += 1
        best = sorted(coverage.items(), key=lambda item: (-item[1], item[0]))[0][0]
        for key in sorted(k for k, cands in pending.items() if best in cands):
            assigned[best].append(key)
            record = groups[key][0]
            resolution.diagnostics.append(
                DiagnosticEntry(
                    record.fqn,
                    record.cell_position,
                    pending[key],
                    best,
                    "greedy_cover",
                )
            )
            del pending[key]

    # --- per library: intersect version sets, demoting blockers -------------
    for library in sorted(assigned):
        keys = sorted(assigned[library], key=lambda k: (groups[k][0].cell_position, k))
        feasible: frozenset[str] | None = None
        kept: list[tuple] = []
        for key in keys:
            versions = hits_per_key[key][library]
            candidate = versions if feasible is None else feasible & versions
            if not candidate:
                record = groups[key][0]
                detail = (
                    f"needs one of {{{', '.join(sorted(versions, key=version_sort_key))}}}, "
                    f"but earlier usages pin {{{', '.join(sorted(feasible, key=version_sort_key))}}}"
                )
                for rec in groups[key]:
                    resolution.unresolved_usages.append(
                        UnresolvedUsage(rec, EMPTY_INTERSECTION, detail)
                    )
                resolution.diagnostics.append(
                    DiagnosticEntry(
                        record.fqn,
                        record.cell_position,
                        (library,),
                        library,
                        EMPTY_INTERSECTION,
                        eliminated=tuple(sorted(versions, key=version_sort_key)),
                    )
                )
                continue
            feasible = candidate
            kept.append(key)
        if feasible is None:
            continue
        known = index.release_versions.get(library, ())
        version_range = VersionRange(
            library=library,
            feasible=tuple(sorted(feasible, key=version_sort_key)),
            known_versions=known,
        )
        version_range.emitted_constraint = choose_emitted_constraint(version_range, policy)
        resolution.resolved.append(version_range)
        resolution.covered[library] = tuple(
            record for key in kept for record in groups[key]
        )

    # --- imports with no API evidence still pin their library ---------------
    if policy.include_import_only:
        covered_roots = {
            record.fqn.split(".")[0]
            for records in resolution.covered.values()
            for record in records
        }
        resolved_libs = {vr.library for vr in resolution.resolved}
        for root in sorted(usages.imported_top_levels):
            if root in covered_roots:
                continue
            if any(root in table for table in TABLES.values()):
                continue
            libraries = sorted(index.top_level.get(root, ()))
            if not libraries:
                continue
            named = [lib for lib in libraries if normalize_name(lib) == normalize_name(root)]
            library = named[0] if named else libraries[0]
            if library in resolved_libs:
                continue
            known = index.release_versions.get(library, ())
            if not known:
                continue
            version_range = VersionRange(
                library=library, feasible=known, known_versions=known
            )
            version_range.emitted_constraint = choose_emitted_constraint(version_range, policy)
            resolution.resolved.append(version_range)
            resolution.covered[library] = ()
            resolved_libs.add(library)
            resolution.diagnostics.append(
                DiagnosticEntry(root, -1, tuple(libraries), library, "import_only")
            )

    resolution.resolved.sort(key=lambda vr: vr.library)
    resolution.unresolved_usages.sort(
        key=lambda u: (u.record.cell_position, u.record.fqn, u.reason)
    )
    resolution.diagnostics.sort(key=lambda d: (d.cell_position, d.fqn, d.choice_rule))
    return resolution


def _contiguous_runs(feasible: tuple[str, ...], known: tuple[str, ...]) -> list[list[str]]:
    positions = {version: i for i, version in enumerate(known)}
    runs: list[list[str]] = []
    previous: int | None = None
    for version in feasible:
        position = positions.get(version)
        if position is None:
            # Version unknown to the ordered list: isolate it in its own run.
            runs.append([version])
            previous = None
            continue
        if previous is not None and position == previous + 1:
            runs[-1].append(version)
        else:
            runs.append([version])
        previous = position
    return runs


def choose_emitted_constraint(
    version_range: VersionRange, policy: ResolvePolicy = ResolvePolicy()
) -> Constraint:
    """Pick the constraint shape admitting the chosen contiguous feasible run.

    A single feasible version pins exactly; a run covering every known
    version emits the bare name; otherwise a closed interval over the run
    (rendered lower-bound-only when the run reaches the newest known
    version).  Disjoint feasible sets keep the most recent run and record a
    warning naming the excluded ones.
    """
    feasible = version_range.feasible
    known = version_range.known_versions or feasible
    runs = _contiguous_runs(feasible, known)
    run = runs[-1]
    if len(runs) > 1:
        excluded = [version for earlier in runs[:-1] for version in earlier]
        version_range.warnings = version_range.warnings + (
            f"feasible versions are disjoint; excluded runs: {{{', '.join(excluded)}}}",
        )

    if policy.pin_latest:
        return Constraint(kind=EXACT, low=run[-1], high=run[-1])
    if len(run) == 1:
        return Constraint(kind=EXACT, low=run[0], high=run[0])
    if len(run) == len(known) and tuple(run) == tuple(known):
        return Constraint(kind=ANY)
    return Constraint(
        kind=CLOSED_INTERVAL,
        low=run[0],
        high=run[-1],
        at_latest=run[-1] == known[-1],
        at_oldest=run[0] == known[0],
    )


def _tool_version() -> str:
    try:
        return importlib.metadata.version("envsniff")
    except importlib.metadata.PackageNotFoundError:
        return "dev"


def _requirement_line(version_range: VersionRange) -> str:
    constraint = version_range.emitted_constraint
    if constraint is None or constraint.kind == ANY:
        return version_range.library
    return f"{version_range.library}{constraint.specifier()}"


def emit_requirements(resolution: Resolution) -> str:
    """Render the resolution as requirements-format text (UTF-8, LF)."""
    lines = [
        f"# generated by envsniff {_tool_version()}",
        f"# bank: {resolution.bank_fingerprint or 'unknown'}",
    ]
    if resolution.interpreter_hint:
        lines.append(f"# {resolution.interpreter_hint}")
    for version_range in sorted(resolution.resolved, key=lambda vr: vr.library):
        lines.append(_requirement_line(version_range))
        for warning in version_range.warnings:
            lines.append(f"# warning: {version_range.library}: {warning}")
    for unresolved in resolution.unresolved_usages:
        lines.append(f"# unresolved: {unresolved.record.fqn} ({unresolved.reason})")
    return "\n".join(lines) + "\n"


def emit_pipfile(
    resolution: Resolution, source_url: str = "https://pypi.org/simple"
) -> str:
    """Render the resolution as Pipfile-format text."""
    lines = [
        "[[source]]",
        f'url = "{source_url}"',
        "verify_ssl = true",
        'name = "pypi"',
        "",
        "[packages]",
    ]
    for version_range in sorted(resolution.resolved, key=lambda vr: vr.library):
        constraint = version_range.emitted_constraint
        spec = constraint.specifier() if constraint is not None else ""
        value = spec if spec else "*"
        lines.append(f'{version_range.library} = "{value}"')
    for unresolved in resolution.unresolved_usages:
        lines.append(f"# unresolved: {unresolved.record.fqn} ({unresolved.reason})")
    return "\n".join(lines) + "\n"


def parse_requirement_line(line: str):
    """Parse one emitted line back through the requirement-specifier grammar.

    Returns (name, specifier_set) using the independent ``packaging``
    implementation, or None for comments and blanks.
    """
    from packaging.requirements import Requirement

    stripped = line.strip()
    if not stripped or stripped.startswith("#"):
        return None
    requirement = Requirement(stripped)
    return requirement.name, requirement.specifier


def constraint_admits(constraint: Constraint, version: str, known: tuple[str, ...]) -> bool:
    """Whether the chosen constraint admits ``version`` (over known versions)."""
    if constraint.kind == ANY:
        return version in known
    if constraint.kind == EXACT:
        return version == constraint.low
    low = Version(constraint.low)
    high = Version(constraint.high) if constraint.high else None
    candidate = Version(version)
    if candidate < low:
        return False
    if constraint.at_latest:
        return version in known
    return high is not None and candidate <= high
