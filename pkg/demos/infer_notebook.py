"""Infer dependency files for a notebook against a previously built bank.

Run demos/build_fixture_bank.py first, then:

    python demos/infer_notebook.py [bank_dir] [notebook]

The fixture notebook calls ``toylib.magic``, an API that exists only in
toylib 2.0 and 3.0, so the emitted constraint is a closed version interval
rather than a bare name.
"""

import pathlib
import sys

from envsniff.api_bank import load_bank
from envsniff.notebook_analysis import collect_usages, execution_counter_skips, load_notebook
from envsniff.resolver import emit_pipfile, emit_requirements, resolve

REPO = pathlib.Path(__file__).resolve().parent.parent


def main() -> None:
    bank_dir = sys.argv[1] if len(sys.argv) > 1 else "demo-output/bank"
    notebook = pathlib.Path(
        sys.argv[2] if len(sys.argv) > 2 else REPO / "fixtures" / "notebooks" / "version_shift.ipynb"
    )

    _, index = load_bank(bank_dir)
    print(f"bank: {index.release_count} releases, {index.api_count} APIs")

    cells = load_notebook(notebook.read_text(encoding="utf-8"))
    print(f"notebook: {notebook.name}, {len(cells)} code cells")
    skips = execution_counter_skips(cells)
    if skips.has_skips:
        print(f"  execution counters show skips (missing {skips.missing_counters})")

    usages = collect_usages(cells, notebook_dir=str(notebook.parent))
    for usage in sorted(usages.usages, key=lambda u: (u.cell_position, u.fqn)):
        print(f"  cell {usage.cell_position}: {usage.fqn} [{usage.origin}]")

    resolution = resolve(usages, index)
    for version_range in resolution.resolved:
        print(
            f"resolved {version_range.library}: feasible {version_range.feasible} "
            f"-> {version_range.emitted_constraint.specifier() or 'any version'}"
        )
    for unresolved in resolution.unresolved_usages:
        print(f"unresolved {unresolved.record.fqn}: {unresolved.reason} ({unresolved.detail})")

    print("\n--- requirements.txt ---")
    print(emit_requirements(resolution), end="")
    print("\n--- Pipfile ---")
    print(emit_pipfile(resolution), end="")


if __name__ == "__main__":
    main()
