"""Acquire library releases from a package index and turn them into API sets.

The metadata client speaks the standard ``/pypi/<name>/json`` endpoint; the
base URL is configurable, and ``file://`` bases work unchanged, which is how
the test fixtures serve a local index.  Downloads are checksum-verified and
cached under ``<cache>/<library>/<version>/<checksum>/`` with atomic
rename-into-place, so repeated ingestion of the same release touches the
network exactly once.
"""

from __future__ import annotations

import hashlib
import json
import os
import shutil
import tarfile
import tempfile
import time
import urllib.error
import urllib.request
import zipfile
from dataclasses import dataclass

from .api_bank import (
    ReleaseApiSet,
    compute_import_closure,
    enhance_tree,
    normalize_name,
    version_sort_key,
)
from .pysrc_model import (
    EmptyRelease,
    SourceModule,
    SourceSyntaxError,
    build_directory_tree,
    extract_import_edges,
    parse_source,
)

DEFAULT_INDEX_BASE = "https://pypi.org"
WHEEL = "wheel"
SDIST = "sdist"

_RETRIES = 3
_BACKOFF_S = 0.5


class IndexUnavailable(Exception):
    """The index endpoint could not be reached; retryable."""


class UnknownLibrary(Exception):
    """The index has no project under this name."""


class ChecksumMismatch(Exception):
    """Downloaded bytes do not match the published digest."""


class CorruptArchive(Exception):
    """The downloaded archive cannot be unpacked."""


@dataclass
class IngestStats:
    modules_total: int = 0
    modules_failed: int = 0
    skipped_constructs: int = 0

    @property
    def failure_ratio(self) -> float:
        return self.modules_failed / self.modules_total if self.modules_total else 0.0


class IngestDegraded(Exception):
    """More than half of a release's modules failed to parse."""

    def __init__(self, stats: IngestStats) -> None:
        self.stats = stats
        super().__init__(
            f"{stats.modules_failed}/{stats.modules_total} modules failed to parse"
        )


@dataclass(frozen=True)
class ReleaseRef:
    """One downloadable release artifact."""

    library: str
    version: str
    archive_url: str
    archive_kind: str
    checksum: str = ""
    filename: str = ""


def _download(url: str, retries: int = _RETRIES) -> bytes:
    last_error: Exception | None = None
    for attempt in range(retries):
        try:
            with urllib.request.urlopen(url) as response:
                return response.read()
        except urllib.error.HTTPError as exc:
            if exc.code == 404:
                raise UnknownLibrary(url) from exc
            last_error = exc
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, FileNotFoundError):
                raise UnknownLibrary(url) from exc
            last_error = exc
        except OSError as exc:
            last_error = exc
        if attempt + 1 < retries:
            time.sleep(_BACKOFF_S * (2**attempt))
    raise IndexUnavailable(f"{url}: {last_error}")


def _is_universal_wheel(filename: str) -> bool:
    return filename.endswith("-none-any.whl")


def _pick_archive(files: list[dict]) -> dict | None:
    wheels = [f for f in files if f.get("packagetype") == "bdist_wheel"]
    universal = [f for f in wheels if _is_universal_wheel(f.get("filename", ""))]
    if universal:
        return universal[0]
    if wheels:
        return wheels[0]
    sdists = [f for f in files if f.get("packagetype") == "sdist"]
    if sdists:
        return sdists[0]
    return None


def list_releases(
    library: str,
    index_base: str = DEFAULT_INDEX_BASE,
    skipped: list[tuple[str, str]] | None = None,
    download=_download,
) -> list[ReleaseRef]:
    """One ReleaseRef per published version with a usable archive.

    Wheels are preferred over sdists, universal wheels over platform ones.
    Versions offering no usable archive go to the ``skipped`` sink with a
    reason instead of failing the listing.
    """
    url = f"{index_base.rstrip('/')}/pypi/{normalize_name(library)}/json"
    try:
        payload = json.loads(_decode_bytes(download(url)))
    except json.JSONDecodeError as exc:
        raise IndexUnavailable(f"{url}: malformed metadata: {exc}") from exc

    sink = skipped if skipped is not None else []
    releases = payload.get("releases")
    if not isinstance(releases, dict):
        raise IndexUnavailable(f"{url}: metadata carries no releases table")

    refs: list[ReleaseRef] = []
    for version in sorted(releases, key=version_sort_key):
        files = [f for f in releases[version] if not f.get("yanked")]
        chosen = _pick_archive(files)
        if chosen is None:
            reason = "no usable archive" if not files else "no wheel or sdist artifact"
            sink.append((version, reason))
            continue
        refs.append(
            ReleaseRef(
                library=normalize_name(library),
                version=version,
                archive_url=chosen.get("url", ""),
                archive_kind=WHEEL if chosen.get("packagetype") == "bdist_wheel" else SDIST,
                checksum=chosen.get("digests", {}).get("sha256", ""),
                filename=chosen.get("filename", ""),
            )
        )
    return refs


def _decode_bytes(data: bytes) -> str:
    return data.decode("utf-8", errors="replace")


def _safe_member_path(name: str) -> str | None:
    path = name.replace("\\", "/").lstrip("/")
    parts = path.split("/")
    if any(part in ("..", "") for part in parts[:-1]) or parts[-1] == "..":
        return None
    return path


def _relocate_wheel_member(path: str) -> str | None:
    """Map a wheel member to its installed location; None drops the member."""
    first, _, rest = path.partition("/")
    if first.endswith(".dist-info"):
        return None
    if first.endswith(".data"):
        category, _, inner = rest.partition("/")
        if category in ("purelib", "platlib") and inner:
            return inner
        return None
    return path


def _unpack_wheel(data: bytes, dest: str) -> None:
    import io

    try:
        with zipfile.ZipFile(io.BytesIO(data)) as archive:
            for member in archive.namelist():
                if member.endswith("/"):
                    continue
                safe = _safe_member_path(member)
                if safe is None:
                    continue
                target = _relocate_wheel_member(safe)
                if target is None:
                    continue
                out_path = os.path.join(dest, *target.split("/"))
                os.makedirs(os.path.dirname(out_path), exist_ok=True)
                with archive.open(member) as src, open(out_path, "wb") as dst:
                    shutil.copyfileobj(src, dst)
    except zipfile.BadZipFile as exc:
        raise CorruptArchive(f"bad wheel: {exc}") from exc


def _unpack_sdist(data: bytes, filename: str, dest: str) -> None:
    import io

    try:
        if filename.endswith(".zip"):
            with zipfile.ZipFile(io.BytesIO(data)) as archive:
                for member in archive.namelist():
                    if member.endswith("/"):
                        continue
                    safe = _safe_member_path(member)
                    if safe is None:
                        continue
                    out_path = os.path.join(dest, *safe.split("/"))
                    os.makedirs(os.path.dirname(out_path), exist_ok=True)
                    with archive.open(member) as src, open(out_path, "wb") as dst:
                        shutil.copyfileobj(src, dst)
        else:
            with tarfile.open(fileobj=io.BytesIO(data), mode="r:*") as archive:
                for member in archive.getmembers():
                    if not member.isfile():
                        continue
                    safe = _safe_member_path(member.name)
                    if safe is None:
                        continue
                    out_path = os.path.join(dest, *safe.split("/"))
                    os.makedirs(os.path.dirname(out_path), exist_ok=True)
                    extracted = archive.extractfile(member)
                    if extracted is None:
                        continue
                    with open(out_path, "wb") as dst:
                        shutil.copyfileobj(extracted, dst)
    except (tarfile.TarError, zipfile.BadZipFile) as exc:
        raise CorruptArchive(f"bad sdist: {exc}") from exc


def _choose_source_root(unpacked: str) -> str:
    """Descend to the directory whose children are the release's packages."""
    entries = sorted(os.listdir(unpacked))
    dirs = [e for e in entries if os.path.isdir(os.path.join(unpacked, e))]
    files = [e for e in entries if os.path.isfile(os.path.join(unpacked, e))]
    if not files and len(dirs) == 1 and not _has_package(unpacked):
        # sdists unpack into <name>-<version>/
        return _choose_source_root(os.path.join(unpacked, dirs[0]))
    if not _has_package(unpacked) and "src" in dirs and _has_package(os.path.join(unpacked, "src")):
        return os.path.join(unpacked, "src")
    return unpacked


def _has_package(directory: str) -> bool:
    try:
        for entry in os.listdir(directory):
            full = os.path.join(directory, entry)
            if os.path.isdir(full) and os.path.isfile(os.path.join(full, "__init__.py")):
                return True
    except OSError:
        return False
    return False


_COMPLETE_MARKER = ".envsniff-complete"


def fetch_and_unpack(ref: ReleaseRef, cache_dir: str, download=_download) -> str:
    """Download, verify, and unpack one release; idempotent via the cache.

    Returns the source root whose children are the release's top-level
    package directories.  A warm cache entry is returned without touching
    the network.
    """
    key = ref.checksum or hashlib.sha256(ref.archive_url.encode()).hexdigest()
    slot = os.path.join(cache_dir, normalize_name(ref.library), ref.version, key)
    tree_dir = os.path.join(slot, "tree")
    if os.path.isfile(os.path.join(slot, _COMPLETE_MARKER)):
        return _choose_source_root(tree_dir)

    data = download(ref.archive_url)
    if ref.checksum:
        digest = hashlib.sha256(data).hexdigest()
        if digest != ref.checksum:
            raise ChecksumMismatch(
                f"{ref.library} {ref.version}: expected {ref.checksum}, got {digest}"
            )

    os.makedirs(os.path.dirname(slot), exist_ok=True)
    staging = tempfile.mkdtemp(prefix=".staging-", dir=os.path.dirname(slot))
    try:
        staged_tree = os.path.join(staging, "tree")
        os.makedirs(staged_tree)
        if ref.archive_kind == WHEEL:
            _unpack_wheel(data, staged_tree)
        else:
            _unpack_sdist(data, ref.filename or ref.archive_url, staged_tree)
        with open(os.path.join(staging, _COMPLETE_MARKER), "w", encoding="utf-8") as marker:
            marker.write(ref.archive_url + "\n")
        if os.path.isdir(slot):
            shutil.rmtree(slot)
        os.replace(staging, slot)
    except Exception:
        shutil.rmtree(staging, ignore_errors=True)
        raise
    return _choose_source_root(tree_dir)


def _walk_relative(root: str) -> list[str]:
    paths: list[str] = []
    for dirpath, _, filenames in os.walk(root):
        for filename in filenames:
            full = os.path.join(dirpath, filename)
            paths.append(os.path.relpath(full, root).replace(os.sep, "/"))
    return sorted(paths)


def ingest_source_tree(root: str, library: str, version: str) -> ReleaseApiSet:
    """Run the full static pipeline over an already unpacked source tree.

    parse -> directory tree -> import edges -> closure -> enhanced API set.
    Per-module parse failures are counted and skipped; a release where more
    than half the modules fail is rejected as IngestDegraded.
    """
    files = _walk_relative(root)
    tree = build_directory_tree(files)

    stats = IngestStats()
    parsed: dict[str, SourceModule] = {}
    for module_path, file_path in sorted(tree.module_files().items()):
        stats.modules_total += 1
        try:
            with open(os.path.join(root, *file_path.split("/")), "rb") as handle:
                data = handle.read()
            module = parse_source(data, module_path, file_path)
        except SourceSyntaxError:
            stats.modules_failed += 1
            continue
        except OSError:
            stats.modules_failed += 1
            continue
        stats.skipped_constructs += len(module.skipped_constructs)
        parsed[module_path] = module

    if stats.modules_total and stats.failure_ratio > 0.5:
        raise IngestDegraded(stats)
    if not parsed:
        raise EmptyRelease(f"{library} {version}: nothing parseable")

    def star_expander(module_path: str) -> frozenset[str] | None:
        module = parsed.get(module_path)
        return module.public_names() if module is not None else None

    notes: list[str] = []
    edges = []
    for module_path in sorted(parsed):
        edges.extend(extract_import_edges(parsed[module_path], star_expander, notes))
    closure = compute_import_closure(edges)

    release = enhance_tree(
        tree,
        closure,
        {path: module.definitions for path, module in parsed.items()},
        library=library,
        version=version,
    )
    extra_notes = list(release.notes) + sorted(set(notes))
    if stats.modules_failed:
        extra_notes.append(
            f"parse_failures:{stats.modules_failed}/{stats.modules_total}"
        )
    release.notes = tuple(dict.fromkeys(extra_notes))
    return release


def ingest_release(ref: ReleaseRef, cache_dir: str, download=_download) -> ReleaseApiSet:
    """Fetch one release and ingest its source tree into a ReleaseApiSet."""
    root = fetch_and_unpack(ref, cache_dir, download=download)
    return ingest_source_tree(root, ref.library, ref.version)
