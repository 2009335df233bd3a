"""envsniff: restore the execution environment of a Jupyter notebook.

Builds a versioned API bank from package releases, extracts and
standardizes a notebook's third-party API usages, infers the minimal
library set with maximal compatible version ranges, and emits installable
dependency files (requirements / Pipfile) that a validation harness can
install and execute.
"""

from .api_bank import (
    ApiBankIndex,
    ApiDiff,
    ApiRecord,
    CallSignature,
    ImportEdge,
    ReleaseApiSet,
    build_index,
    compute_import_closure,
    diff_releases,
    enhance_tree,
    load_bank,
    query,
    save_bank,
)
from .notebook_analysis import (
    CodeCell,
    UsageRecord,
    UsageSet,
    classify_name,
    collect_usages,
    load_notebook,
    sanitize_cell,
    trace_instance_calls,
)
from .pysrc_model import (
    Definition,
    DirectoryTree,
    RawImport,
    SourceModule,
    build_directory_tree,
    extract_import_edges,
    parse_source,
)
from .release_ingest import (
    ReleaseRef,
    fetch_and_unpack,
    ingest_release,
    ingest_source_tree,
    list_releases,
)
from .resolver import (
    Resolution,
    ResolvePolicy,
    VersionRange,
    choose_emitted_constraint,
    emit_pipfile,
    emit_requirements,
    resolve,
)
from .validation_harness import (
    EnvPlan,
    ErrorClass,
    InstallOutcome,
    ValidationReport,
    classify_install_log,
    classify_runtime_error,
    plan_environment,
    run_validation,
)

__version__ = "0.3.0"

__all__ = [
    "ApiBankIndex",
    "ApiDiff",
    "ApiRecord",
    "CallSignature",
    "CodeCell",
    "Definition",
    "DirectoryTree",
    "EnvPlan",
    "ErrorClass",
    "ImportEdge",
    "InstallOutcome",
    "RawImport",
    "ReleaseApiSet",
    "ReleaseRef",
    "Resolution",
    "ResolvePolicy",
    "SourceModule",
    "UsageRecord",
    "UsageSet",
    "ValidationReport",
    "VersionRange",
    "build_directory_tree",
    "build_index",
    "choose_emitted_constraint",
    "classify_install_log",
    "classify_name",
    "classify_runtime_error",
    "collect_usages",
    "compute_import_closure",
    "diff_releases",
    "emit_pipfile",
    "emit_requirements",
    "enhance_tree",
    "extract_import_edges",
    "fetch_and_unpack",
    "ingest_release",
    "ingest_source_tree",
    "list_releases",
    "load_bank",
    "load_notebook",
    "parse_source",
    "plan_environment",
    "query",
    "resolve",
    "run_validation",
    "sanitize_cell",
    "save_bank",
    "trace_instance_calls",
]
