"""Show how a library's API surface drifts across releases.

toylib gains ``magic`` in 2.0, grows a ``retries`` keyword on ``beta`` in
3.0, and drops ``magic`` again in 4.0 -- a miniature of the add/remove/
parameter-change churn that breaks unpinned notebooks.

    python demos/diff_releases.py
"""

import pathlib

from envsniff.api_bank import diff_releases
from envsniff.release_ingest import ingest_source_tree

FIXTURES = pathlib.Path(__file__).resolve().parent.parent / "fixtures"


def main() -> None:
    releases = {
        version: ingest_source_tree(str(FIXTURES / "toylib" / version), "toylib", version)
        for version in ("1.0", "2.0", "3.0", "4.0")
    }
    pairs = [("1.0", "2.0"), ("2.0", "3.0"), ("3.0", "4.0"), ("1.0", "4.0")]
    for old, new in pairs:
        diff = diff_releases(releases[old], releases[new])
        print(f"== toylib {old} -> {new}")
        for name in sorted(diff.added):
            print(f"   + {name}")
        for name in sorted(diff.removed):
            print(f"   - {name}")
        for name, before, after in sorted(diff.param_changed):
            print(f"   ~ {name}: {before} -> {after}")
        if not (diff.added or diff.removed or diff.param_changed):
            print("   (no changes)")
        print()


if __name__ == "__main__":
    main()
