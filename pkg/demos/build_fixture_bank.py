"""Build a complete local API bank from the bundled fixture libraries.

Walks through the whole ingestion story end to end, without any network:

1. package each fixture source tree into a real wheel archive,
2. write a package-index metadata document served over ``file://``,
3. list releases, fetch + unpack each wheel, and ingest it,
4. persist everything as a bank store (per-release records + index).

Usage:  python demos/build_fixture_bank.py [output_dir]
"""

import base64
import hashlib
import json
import pathlib
import sys
import zipfile

from envsniff.api_bank import merge_into_bank
from envsniff.release_ingest import ingest_release, list_releases

REPO = pathlib.Path(__file__).resolve().parent.parent
FIXTURES = REPO / "fixtures"

PROJECTS = {
    "toylib": ["1.0", "2.0", "3.0", "4.0"],
    "brokenlib": ["1.0"],
}


def wheel_record_hash(data: bytes) -> str:
    digest = hashlib.sha256(data).digest()
    return "sha256=" + base64.urlsafe_b64encode(digest).rstrip(b"=").decode("ascii")


def build_wheel(source_dir: pathlib.Path, name: str, version: str, dest: pathlib.Path) -> pathlib.Path:
    """Zip one fixture tree into an installable wheel (purelib, py3-none-any)."""
    dest.mkdir(parents=True, exist_ok=True)
    wheel_path = dest / f"{name}-{version}-py3-none-any.whl"
    dist_info = f"{name}-{version}.dist-info"

    members = [
        (p.relative_to(source_dir).as_posix(), p.read_bytes())
        for p in sorted(source_dir.rglob("*"))
        if p.is_file()
    ]
    members.append(
        (f"{dist_info}/METADATA", f"Metadata-Version: 2.1\nName: {name}\nVersion: {version}\n".encode())
    )
    members.append(
        (
            f"{dist_info}/WHEEL",
            b"Wheel-Version: 1.0\nGenerator: envsniff-demo\nRoot-Is-Purelib: true\nTag: py3-none-any\n",
        )
    )
    record = [f"{m},{wheel_record_hash(d)},{len(d)}" for m, d in members]
    record.append(f"{dist_info}/RECORD,,")
    members.append((f"{dist_info}/RECORD", ("\n".join(record) + "\n").encode()))

    with zipfile.ZipFile(wheel_path, "w", zipfile.ZIP_DEFLATED) as archive:
        for member, data in members:
            archive.writestr(member, data)
    return wheel_path


def main() -> None:
    out = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "demo-output").resolve()
    wheels_dir = out / "wheels"
    index_dir = out / "index"
    bank_dir = out / "bank"
    cache_dir = out / "cache"

    # 1 + 2: wheels and the index metadata they are served from
    for name, versions in PROJECTS.items():
        releases_doc = {}
        for version in versions:
            wheel = build_wheel(FIXTURES / name / version, name, version, wheels_dir)
            releases_doc[version] = [
                {
                    "url": wheel.as_uri(),
                    "packagetype": "bdist_wheel",
                    "filename": wheel.name,
                    "digests": {"sha256": hashlib.sha256(wheel.read_bytes()).hexdigest()},
                }
            ]
        doc_path = index_dir / "pypi" / name / "json"
        doc_path.parent.mkdir(parents=True, exist_ok=True)
        doc_path.write_text(json.dumps({"info": {"name": name}, "releases": releases_doc}, indent=1))
        print(f"indexed {name}: versions {', '.join(versions)}")

    # 3: the same client code that talks to a live index, pointed at file://
    index_base = index_dir.as_uri()
    ingested = []
    for name in PROJECTS:
        for ref in list_releases(name, index_base):
            release = ingest_release(ref, str(cache_dir))
            ingested.append(release)
            print(
                f"ingested {release.library} {release.version}: "
                f"{len(release.apis)} APIs, {len(release.alias_map)} aliases"
            )

    # 4: persist as a bank store
    index = merge_into_bank(ingested, str(bank_dir))
    print(f"bank written to {bank_dir}")
    print(f"  releases: {index.release_count}, APIs: {index.api_count}")
    print(f"  index base for `envsniff --index-url`: {index_base}")
    print(f"  wheels for offline installs: {wheels_dir}")


if __name__ == "__main__":
    main()
