"""The versioned API bank: per-release API sets, aliases, diffs, and the query index.

One release of one library is condensed into a :class:`ReleaseApiSet`: the
canonical fully-qualified names of everything it defines, plus an alias map
covering every alternate spelling created by re-export chains.  The alias
map is what makes ``pandas.read_excel`` and
``pandas.io.excel._base.read_excel`` resolve to the same callable even
though only the latter names the defining module.

Re-exports are modeled as import-flow edges ``source --name--> target`` and
closed under chaining: when module A exports a name into B and B exports
the same name into C, the name is importable from C as well.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
from collections import defaultdict
from dataclasses import dataclass, field

from packaging.version import InvalidVersion, Version

from .pysrc_model import (  # noqa: F401  (ImportEdge is part of this module's surface)
    CLASS,
    METHOD,
    Definition,
    DirectoryTree,
    ImportEdge,
)

STORE_FORMAT_VERSION = 1
INDEX_FILENAME = "index.jsonl"
RELEASES_DIRNAME = "releases"


class LibraryMismatch(Exception):
    """Diff requested across two different libraries."""


class DuplicateRelease(Exception):
    """The same (library, version) pair ingested twice into one bank."""


class CorruptBank(Exception):
    """A bank store file failed its checksum or schema validation."""

    def __init__(self, reason: str) -> None:
        self.reason = reason
        super().__init__(reason)


class UnsupportedFormat(Exception):
    """A bank store file was written by an incompatible format version."""

    def __init__(self, found: int, supported: int) -> None:
        self.found = found
        self.supported = supported
        super().__init__(f"store format {found} (supported: {supported})")


def normalize_name(name: str) -> str:
    """Case/punctuation-normalized package index name (``-``/``_`` equivalent)."""
    return re.sub(r"[-_.]+", "-", name).lower()


def version_sort_key(version: str):
    """Order versions by ecosystem rules; unparseable ones sort last, lexically."""
    try:
        return (0, Version(version), "")
    except InvalidVersion:
        return (1, Version("0"), version)


@dataclass(frozen=True)
class ApiRecord:
    """One queryable API with its canonical name and static signature."""

    fqn: str
    kind: str
    positional_params: tuple[str, ...] = ()
    keyword_params: frozenset[tuple[str, bool]] = frozenset()
    has_catchall_positional: bool = False
    has_catchall_keywords: bool = False

    def __post_init__(self) -> None:
        if self.fqn.count(".") < 1:
            raise ValueError(f"fqn needs at least two segments: {self.fqn!r}")

    @property
    def keyword_names(self) -> frozenset[str]:
        return frozenset(name for name, _ in self.keyword_params)

    def signature_text(self) -> str:
        parts = list(self.positional_params)
        if self.has_catchall_positional:
            parts.append("*args")
        parts.extend(
            name + ("=…" if has_default else "")
            for name, has_default in sorted(self.keyword_params)
        )
        if self.has_catchall_keywords:
            parts.append("**kwargs")
        return f"({', '.join(parts)})"

    def accepts_keywords(self, names) -> bool:
        if self.has_catchall_keywords:
            return True
        known = self.keyword_names | set(self.positional_params)
        return all(name in known for name in names)


@dataclass(frozen=True)
class CallSignature:
    """Shape of one observed call site: positional count plus keyword names."""

    positional_count: int = 0
    keyword_names: tuple[str, ...] = ()


REFERENCE_ONLY = "reference_only"


@dataclass
class ReleaseApiSet:
    """Complete API surface of one library at one version."""

    library: str
    version: str
    apis: frozenset[ApiRecord]
    alias_map: dict[str, str] = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        canonical = {record.fqn for record in self.apis}
        dangling = [a for a, c in self.alias_map.items() if c not in canonical]
        if dangling:
            raise ValueError(f"alias targets missing from apis: {sorted(dangling)[:5]}")

    def canonical_names(self) -> frozenset[str]:
        return frozenset(record.fqn for record in self.apis)

    def all_names(self) -> frozenset[str]:
        return self.canonical_names() | frozenset(self.alias_map)

    def _records_by_fqn(self) -> dict[str, ApiRecord]:
        cached = self.__dict__.get("_fqn_cache")
        if cached is None or len(cached) != len(self.apis):
            cached = {record.fqn: record for record in self.apis}
            self.__dict__["_fqn_cache"] = cached
        return cached

    def record_for(self, fqn: str) -> ApiRecord | None:
        canonical = self.alias_map.get(fqn, fqn)
        return self._records_by_fqn().get(canonical)


@dataclass(frozen=True)
class ApiDiff:
    """Added/removed/parameter-changed names between two releases of one library."""

    added: frozenset[str]
    removed: frozenset[str]
    param_changed: frozenset[tuple[str, str, str]]


def compute_import_closure(edges: list[ImportEdge]) -> list[ImportEdge]:
    """Close re-export edges under chaining.

    ``A --f--> B`` and ``B --f--> C`` combine into ``A --f--> C`` (through a
    rename, the chained edge keeps the outermost exported name and the
    innermost origin).  Iterates to a fixed point; already-present edges are
    never re-added, so cycles terminate.  Original edges are included.
    """
    closure: set[ImportEdge] = set(edges)
    by_source: dict[str, set[ImportEdge]] = defaultdict(set)
    by_target: dict[str, set[ImportEdge]] = defaultdict(set)
    for edge in closure:
        by_source[edge.source_module].add(edge)
        by_target[edge.target_module].add(edge)

    worklist = list(closure)
    while worklist:
        edge = worklist.pop()
        chained: list[ImportEdge] = []
        # edge as the first hop: follow exports of edge.name out of edge.target
        for nxt in by_source.get(edge.target_module, ()):
            if nxt.origin_name == edge.name and edge.source_module != nxt.target_module:
                chained.append(
                    ImportEdge(edge.source_module, nxt.name, nxt.target_module, edge.origin_name)
                )
        # edge as the second hop: extend exports arriving at edge.source
        for prev in by_target.get(edge.source_module, ()):
            if prev.name == edge.origin_name and prev.source_module != edge.target_module:
                chained.append(
                    ImportEdge(prev.source_module, edge.name, edge.target_module, prev.origin_name)
                )
        for new_edge in chained:
            if new_edge not in closure:
                closure.add(new_edge)
                by_source[new_edge.source_module].add(new_edge)
                by_target[new_edge.target_module].add(new_edge)
                worklist.append(new_edge)

    return sorted(closure, key=ImportEdge.sort_key)


def _strip_receiver(definition: Definition) -> tuple[tuple[str, ...], frozenset[tuple[str, bool]]]:
    positional = definition.positional_params
    if definition.kind == METHOD and positional and positional[0] in ("self", "cls"):
        positional = positional[1:]
    return positional, definition.keyword_params


def _record_from_definition(module_path: str, definition: Definition) -> ApiRecord:
    positional, keyword = _strip_receiver(definition)
    return ApiRecord(
        fqn=f"{module_path}.{definition.local_name}",
        kind=definition.kind,
        positional_params=positional,
        keyword_params=keyword,
        has_catchall_positional=definition.has_catchall_positional,
        has_catchall_keywords=definition.has_catchall_keywords,
    )


def enhance_tree(
    tree: DirectoryTree,
    closure: list[ImportEdge],
    defs: dict[str, list[Definition]],
    library: str,
    version: str,
) -> ReleaseApiSet:
    """Combine the directory tree, closed edges, and per-module definitions
    into the release's complete API set.

    Canonical names come straight from the tree; aliases come from closure
    edges whose source actually defines the exported name.  Class aliases
    carry their methods along, and re-exported submodules contribute an
    aliased spelling for everything beneath them.  Edges whose name resolves
    nowhere in the release (typically re-exports of an external dependency)
    are recorded as ``dangling_edge`` notes, never errors.
    """
    module_files = tree.module_files()
    module_paths = tree.module_paths()
    notes: list[str] = []

    records: dict[str, ApiRecord] = {}
    class_methods: dict[str, list[str]] = defaultdict(list)
    defs_by_module: dict[str, dict[str, Definition]] = {}
    for module_path, definitions in defs.items():
        if module_path not in module_paths and module_path not in module_files:
            continue
        per_name: dict[str, Definition] = {}
        for definition in definitions:
            record = _record_from_definition(module_path, definition)
            records[record.fqn] = record
            per_name[definition.local_name] = definition
            if definition.kind == METHOD:
                class_methods[f"{module_path}.{definition.owner_class}"].append(definition.name)
        defs_by_module[module_path] = per_name

    alias_map: dict[str, str] = {}

    def add_alias(alias: str, canonical: str) -> None:
        if alias == canonical or canonical not in records:
            return
        alias_map.setdefault(alias, canonical)

    module_reexports: list[tuple[str, str]] = []  # (alias prefix, module path)

    for edge in sorted(closure, key=ImportEdge.sort_key):
        source_defs = defs_by_module.get(edge.source_module, {})
        definition = source_defs.get(edge.origin_name)
        if definition is not None and definition.owner_class is None:
            canonical = f"{edge.source_module}.{edge.origin_name}"
            alias = f"{edge.target_module}.{edge.name}"
            add_alias(alias, canonical)
            if definition.kind == CLASS:
                for method in class_methods.get(canonical, ()):
                    add_alias(f"{alias}.{method}", f"{canonical}.{method}")
            continue
        submodule = f"{edge.source_module}.{edge.origin_name}"
        if submodule in module_paths:
            module_reexports.append((f"{edge.target_module}.{edge.name}", submodule))
            continue
        if (
            edge.source_module in module_paths
            and edge.source_module.rsplit(".", 1)[-1] == edge.origin_name
        ):
            module_reexports.append((f"{edge.target_module}.{edge.name}", edge.source_module))
            continue

    direct_aliases = dict(alias_map)
    for prefix, module_path in sorted(set(module_reexports)):
        if prefix == module_path:
            continue
        marker = module_path + "."
        for fqn in records:
            if fqn.startswith(marker):
                add_alias(prefix + fqn[len(module_path):], fqn)
        for alias, canonical in direct_aliases.items():
            if alias.startswith(marker):
                add_alias(prefix + alias[len(module_path):], canonical)

    resolved_names = {(a.rsplit(".", 1)[0], a.rsplit(".", 1)[-1]) for a in alias_map}
    for edge in closure:
        key = (edge.target_module, edge.name)
        if key in resolved_names:
            continue
        exported = f"{edge.target_module}.{edge.name}"
        if exported in records or any(
            prefix == exported for prefix, _ in module_reexports
        ):
            continue
        notes.append(
            f"dangling_edge:{edge.source_module}--{edge.name}-->{edge.target_module}"
        )

    return ReleaseApiSet(
        library=normalize_name(library),
        version=version,
        apis=frozenset(records.values()),
        alias_map=alias_map,
        notes=tuple(sorted(set(notes))),
    )


def diff_releases(a: ReleaseApiSet, b: ReleaseApiSet) -> ApiDiff:
    """Name/signature evolution between an earlier and a later release.

    Names are compared over canonical fully-qualified names plus aliases;
    a name present on both sides changes when its positional list or
    keyword set differs.
    """
    if a.library != b.library:
        raise LibraryMismatch(f"{a.library!r} vs {b.library!r}")

    names_a = a.all_names()
    names_b = b.all_names()
    added = names_b - names_a
    removed = names_a - names_b

    changed: set[tuple[str, str, str]] = set()
    for name in names_a & names_b:
        record_a = a.record_for(name)
        record_b = b.record_for(name)
        if record_a is None or record_b is None:
            continue
        same = (
            record_a.positional_params == record_b.positional_params
            and record_a.keyword_params == record_b.keyword_params
            and record_a.has_catchall_positional == record_b.has_catchall_positional
            and record_a.has_catchall_keywords == record_b.has_catchall_keywords
        )
        if not same:
            changed.add((name, record_a.signature_text(), record_b.signature_text()))

    return ApiDiff(
        added=frozenset(added),
        removed=frozenset(removed),
        param_changed=frozenset(changed),
    )


@dataclass
class ApiBankIndex:
    """Inverted index: fully-qualified name -> releases that provide it."""

    entries: dict[str, tuple[tuple[str, str], ...]]
    top_level: dict[str, frozenset[str]]
    release_versions: dict[str, tuple[str, ...]]
    release_count: int
    api_count: int
    signatures: dict[tuple[str, str, str], ApiRecord] = field(default_factory=dict, repr=False)

    def libraries(self) -> tuple[str, ...]:
        return tuple(sorted(self.release_versions))


def build_index(releases: list[ReleaseApiSet]) -> ApiBankIndex:
    """Index every canonical and alias name of every release for query."""
    seen: set[tuple[str, str]] = set()
    entry_sets: dict[str, set[tuple[str, str]]] = defaultdict(set)
    top_level: dict[str, set[str]] = defaultdict(set)
    versions: dict[str, set[str]] = defaultdict(set)
    signatures: dict[tuple[str, str, str], ApiRecord] = {}
    api_count = 0

    for release in releases:
        key = (release.library, release.version)
        if key in seen:
            raise DuplicateRelease(f"{release.library} {release.version}")
        seen.add(key)
        versions[release.library].add(release.version)
        api_count += len(release.apis)
        roots = set()
        for record in release.apis:
            entry_sets[record.fqn].add(key)
            signatures[(record.fqn, *key)] = record
            roots.add(record.fqn.split(".")[0])
        for alias, canonical in release.alias_map.items():
            entry_sets[alias].add(key)
            record = release.record_for(canonical)
            if record is not None:
                signatures[(alias, *key)] = record
            roots.add(alias.split(".")[0])
        for root in roots:
            top_level[root].add(release.library)

    def hit_key(hit: tuple[str, str]):
        return (hit[0], version_sort_key(hit[1]))

    return ApiBankIndex(
        entries={fqn: tuple(sorted(hits, key=hit_key)) for fqn, hits in entry_sets.items()},
        top_level={root: frozenset(libs) for root, libs in top_level.items()},
        release_versions={
            lib: tuple(sorted(vs, key=version_sort_key)) for lib, vs in versions.items()
        },
        release_count=len(seen),
        api_count=api_count,
        signatures=signatures,
    )


def query(
    index: ApiBankIndex,
    fqn: str,
    call: CallSignature | str | None = None,
) -> list[tuple[str, str]]:
    """All (library, version) pairs providing ``fqn``, signature-filtered.

    When the observed call supplies keyword names, releases whose recorded
    signature lacks one of them (and has no catch-all keyword parameter)
    are excluded.  An empty result means the name is unknown to the bank.
    """
    hits = index.entries.get(fqn, ())
    keywords: tuple[str, ...] = ()
    if isinstance(call, CallSignature):
        keywords = call.keyword_names
    if keywords:
        filtered = []
        for library, version in hits:
            record = index.signatures.get((fqn, library, version))
            if record is None or record.accepts_keywords(keywords):
                filtered.append((library, version))
        hits = tuple(filtered)
    return sorted(hits, key=lambda hit: (hit[0], version_sort_key(hit[1])))


# --- persistent store -------------------------------------------------------
#
# Layout:  <bank_dir>/releases/<library>/<version>.apirec   one release each
#          <bank_dir>/index.jsonl                           the query index
#
# Every file is line-delimited JSON: a header object with ``format_version``
# and a sha256 over the payload lines, then one object per record.

def _payload_checksum(lines: list[str]) -> str:
    digest = hashlib.sha256()
    for line in lines:
        digest.update(line.encode("utf-8"))
        digest.update(b"\n")
    return digest.hexdigest()


def _record_to_json(record: ApiRecord) -> dict:
    return {
        "t": "api",
        "fqn": record.fqn,
        "kind": record.kind,
        "pos": list(record.positional_params),
        "kw": sorted([name, has_default] for name, has_default in record.keyword_params),
        "varargs": record.has_catchall_positional,
        "kwargs": record.has_catchall_keywords,
    }


def _record_from_json(obj: dict) -> ApiRecord:
    return ApiRecord(
        fqn=obj["fqn"],
        kind=obj["kind"],
        positional_params=tuple(obj["pos"]),
        keyword_params=frozenset((name, bool(flag)) for name, flag in obj["kw"]),
        has_catchall_positional=bool(obj["varargs"]),
        has_catchall_keywords=bool(obj["kwargs"]),
    )


def release_record_path(bank_dir: str, library: str, version: str) -> str:
    return os.path.join(
        bank_dir, RELEASES_DIRNAME, normalize_name(library), f"{version}.apirec"
    )


def save_release(release: ReleaseApiSet, bank_dir: str) -> str:
    path = release_record_path(bank_dir, release.library, release.version)
    os.makedirs(os.path.dirname(path), exist_ok=True)
    lines = [json.dumps(_record_to_json(r), sort_keys=True) for r in sorted(release.apis, key=lambda r: r.fqn)]
    lines += [
        json.dumps({"t": "alias", "alias": a, "canonical": c}, sort_keys=True)
        for a, c in sorted(release.alias_map.items())
    ]
    lines += [json.dumps({"t": "note", "text": n}, sort_keys=True) for n in release.notes]
    header = {
        "format_version": STORE_FORMAT_VERSION,
        "kind": "release",
        "library": release.library,
        "version": release.version,
        "payload_sha256": _payload_checksum(lines),
    }
    tmp_path = path + ".tmp"
    with open(tmp_path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(json.dumps(header, sort_keys=True) + "\n")
        handle.write("".join(line + "\n" for line in lines))
    os.replace(tmp_path, path)
    return path


def _read_store_file(path: str, expected_kind: str) -> tuple[dict, list[dict]]:
    try:
        with open(path, "r", encoding="utf-8") as handle:
            raw_lines = handle.read().splitlines()
    except OSError as exc:
        raise CorruptBank(f"unreadable store file {path}: {exc}") from exc
    if not raw_lines:
        raise CorruptBank(f"empty store file {path}")
    try:
        header = json.loads(raw_lines[0])
    except json.JSONDecodeError as exc:
        raise CorruptBank(f"malformed header in {path}: {exc}") from exc
    found = header.get("format_version")
    if found != STORE_FORMAT_VERSION:
        raise UnsupportedFormat(found=found, supported=STORE_FORMAT_VERSION)
    if header.get("kind") != expected_kind:
        raise CorruptBank(f"expected {expected_kind} record in {path}")
    payload = raw_lines[1:]
    if _payload_checksum(payload) != header.get("payload_sha256"):
        raise CorruptBank(f"checksum mismatch in {path}")
    try:
        return header, [json.loads(line) for line in payload]
    except json.JSONDecodeError as exc:
        raise CorruptBank(f"malformed payload in {path}: {exc}") from exc


def load_release(path: str) -> ReleaseApiSet:
    header, objects = _read_store_file(path, "release")
    apis = []
    aliases = {}
    notes = []
    for obj in objects:
        tag = obj.get("t")
        if tag == "api":
            apis.append(_record_from_json(obj))
        elif tag == "alias":
            aliases[obj["alias"]] = obj["canonical"]
        elif tag == "note":
            notes.append(obj["text"])
        else:
            raise CorruptBank(f"unknown record tag {tag!r} in {path}")
    try:
        return ReleaseApiSet(
            library=header["library"],
            version=header["version"],
            apis=frozenset(apis),
            alias_map=aliases,
            notes=tuple(notes),
        )
    except (KeyError, ValueError) as exc:
        raise CorruptBank(f"inconsistent release record {path}: {exc}") from exc


def save_bank(releases: list[ReleaseApiSet], index: ApiBankIndex, path: str) -> None:
    """Write the bank store: one record per release plus the index artifact."""
    os.makedirs(path, exist_ok=True)
    for release in releases:
        save_release(release, path)

    lines = [
        json.dumps({"t": "entry", "fqn": fqn, "hits": [list(h) for h in hits]}, sort_keys=True)
        for fqn, hits in sorted(index.entries.items())
    ]
    lines += [
        json.dumps({"t": "top_level", "module": mod, "libraries": sorted(libs)}, sort_keys=True)
        for mod, libs in sorted(index.top_level.items())
    ]
    header = {
        "format_version": STORE_FORMAT_VERSION,
        "kind": "index",
        "release_count": index.release_count,
        "api_count": index.api_count,
        "payload_sha256": _payload_checksum(lines),
    }
    index_path = os.path.join(path, INDEX_FILENAME)
    tmp_path = index_path + ".tmp"
    with open(tmp_path, "w", encoding="utf-8", newline="\n") as handle:
        handle.write(json.dumps(header, sort_keys=True) + "\n")
        handle.write("".join(line + "\n" for line in lines))
    os.replace(tmp_path, index_path)


def load_bank(path: str) -> tuple[list[ReleaseApiSet], ApiBankIndex]:
    """Load a bank store; the index is rebuilt from releases and verified
    against the stored artifact so silent divergence surfaces as CorruptBank."""
    releases_dir = os.path.join(path, RELEASES_DIRNAME)
    if not os.path.isdir(releases_dir):
        raise CorruptBank(f"missing {RELEASES_DIRNAME}/ under {path}")
    releases: list[ReleaseApiSet] = []
    for library in sorted(os.listdir(releases_dir)):
        lib_dir = os.path.join(releases_dir, library)
        if not os.path.isdir(lib_dir):
            continue
        for filename in sorted(os.listdir(lib_dir)):
            if filename.endswith(".apirec"):
                releases.append(load_release(os.path.join(lib_dir, filename)))

    index = build_index(releases)

    index_path = os.path.join(path, INDEX_FILENAME)
    header, objects = _read_store_file(index_path, "index")
    if header.get("release_count") != index.release_count or header.get("api_count") != index.api_count:
        raise CorruptBank("index statistics disagree with stored releases")
    stored_entries = {
        obj["fqn"]: tuple((lib, ver) for lib, ver in obj["hits"])
        for obj in objects
        if obj.get("t") == "entry"
    }
    if stored_entries != index.entries:
        raise CorruptBank("index entries disagree with stored releases")
    return releases, index


def merge_into_bank(new_releases: list[ReleaseApiSet], bank_dir: str) -> ApiBankIndex:
    """Incrementally add releases to a bank store, replacing same-version records."""
    existing: dict[tuple[str, str], ReleaseApiSet] = {}
    if os.path.exists(os.path.join(bank_dir, INDEX_FILENAME)):
        for release in load_bank(bank_dir)[0]:
            existing[(release.library, release.version)] = release
    for release in new_releases:
        existing[(release.library, release.version)] = release
    merged = [existing[key] for key in sorted(existing)]
    index = build_index(merged)
    save_bank(merged, index, bank_dir)
    return index
