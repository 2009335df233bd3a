"""Structural model of Python library source code.

Parses individual source files into modules, definitions, and raw import
statements, and arranges the files of one unpacked release into a directory
tree of packages and modules.  Everything here is pure and deterministic:
identical input bytes always produce identical structures, so the functions
are safe to call from many workers at once.

Only statically addressable callables are modeled: top-level functions,
classes, and methods declared directly in a class body.  Definitions nested
inside function bodies have no stable dotted name and are skipped (counted,
never fatal).
"""

from __future__ import annotations

import ast
import io
import re
import tokenize
from dataclasses import dataclass, field

FUNCTION = "function"
CLASS = "class"
METHOD = "method"

IMPORT = "import"
FROM_IMPORT = "from_import"
STAR_IMPORT = "star_import"

MODULE_SCOPE = "module"
CLASS_SCOPE = "class"
FUNCTION_SCOPE = "function"


class SourceSyntaxError(Exception):
    """Source text is invalid under every supported grammar level.

    Named ``SourceSyntaxError`` rather than ``SyntaxError`` to avoid
    shadowing the builtin; carries the module path and offending line.
    """

    def __init__(self, module_path: str, line: int, message: str = "") -> None:
        self.module_path = module_path
        self.line = line
        super().__init__(f"{module_path}:{line}: {message or 'invalid syntax'}")


class EmptyRelease(Exception):
    """A release contains no importable module after orphan exclusion."""


@dataclass(frozen=True)
class Definition:
    """One statically declared callable: function, class, or method.

    ``positional_params`` holds parameters without defaults, in order;
    parameters with defaults (and keyword-only parameters) live in
    ``keyword_params`` as ``(name, has_default)`` pairs.  ``*args`` and
    ``**kwargs`` collapse to the two catch-all flags.
    """

    name: str
    kind: str
    positional_params: tuple[str, ...] = ()
    keyword_params: frozenset[tuple[str, bool]] = frozenset()
    owner_class: str | None = None
    is_underscore_named: bool = False
    has_catchall_positional: bool = False
    has_catchall_keywords: bool = False

    def __post_init__(self) -> None:
        if (self.kind == METHOD) != (self.owner_class is not None):
            raise ValueError(f"kind={self.kind!r} inconsistent with owner_class={self.owner_class!r}")
        overlap = set(self.positional_params) & {n for n, _ in self.keyword_params}
        if overlap:
            raise ValueError(f"parameters both positional and keyword: {sorted(overlap)}")

    @property
    def local_name(self) -> str:
        """Name relative to the module: ``fun`` or ``Owner.fun``."""
        if self.owner_class is not None:
            return f"{self.owner_class}.{self.name}"
        return self.name


@dataclass(frozen=True)
class RawImport:
    """One import statement, with relative imports already absolutized."""

    form: str
    source_module: str
    imported_names: tuple[tuple[str, str | None], ...] = ()
    line: int = 0
    scope: str = MODULE_SCOPE

    def __post_init__(self) -> None:
        if self.form == STAR_IMPORT and self.imported_names:
            raise ValueError("star import carries no imported names")


@dataclass
class SourceModule:
    """Parse result for one source file."""

    module_path: str
    file_path: str
    definitions: list[Definition] = field(default_factory=list)
    import_statements: list[RawImport] = field(default_factory=list)
    declared_all: tuple[str, ...] | None = None
    skipped_constructs: tuple[str, ...] = ()

    def definition_names(self) -> set[str]:
        return {d.local_name for d in self.definitions}

    def public_names(self) -> frozenset[str]:
        """Names a ``from <this module> import *`` would bind.

        A statically declared ``__all__`` wins; otherwise every
        non-underscore top-level definition and import binding.
        """
        if self.declared_all is not None:
            return frozenset(self.declared_all)
        names: set[str] = set()
        for d in self.definitions:
            if d.owner_class is None and not d.is_underscore_named:
                names.add(d.name)
        for imp in self.import_statements:
            if imp.scope != MODULE_SCOPE or imp.form == STAR_IMPORT:
                continue
            for name, alias in imp.imported_names:
                bound = alias or name.split(".")[0]
                if not bound.startswith("_"):
                    names.add(bound)
        return frozenset(names)


@dataclass
class TreeNode:
    """Node of a release directory tree: a package or a module."""

    name: str
    path: str
    is_package: bool
    implicit_namespace: bool = False
    file_path: str | None = None
    children: dict[str, "TreeNode"] = field(default_factory=dict)


@dataclass
class DirectoryTree:
    """Package/module layout of one unpacked release.

    ``root`` names the first top-level package; releases shipping several
    top-level packages list them all in ``top_level_packages``.  Files that
    sit outside any package land under the synthetic ``__orphan__`` node and
    never contribute to API naming.
    """

    root: str
    top_level_packages: tuple[str, ...]
    nodes: dict[str, TreeNode]
    orphans: tuple[str, ...] = ()

    def module_files(self) -> dict[str, str]:
        """Map every non-orphan module path to its source file path."""
        return {
            path: node.file_path
            for path, node in self.nodes.items()
            if node.file_path is not None
        }

    def module_paths(self) -> frozenset[str]:
        return frozenset(self.nodes)


_CODING_RE = re.compile(rb"coding[:=]\s*([-\w.]+)")

# Legacy-grammar rewrites tried when the modern parse fails.  These cover
# the statement forms that actually occur in old library code; anything
# they cannot repair surfaces as SourceSyntaxError.
_PRINT_CHEVRON_RE = re.compile(r"^(\s*)print\s*>>\s*([^,]+),\s*(.+?)(\s*,?)\s*$")
_PRINT_BARE_RE = re.compile(r"^(\s*)print\s*$")
_PRINT_STMT_RE = re.compile(r"^(\s*)print\s+(?!\()(.+?)(\s*,?)\s*$")
_EXCEPT_COMMA_RE = re.compile(r"^(\s*except\s+[^,()]+(?:\([^)]*\))?)\s*,\s*(\w+)\s*:")
_LONG_SUFFIX_RE = re.compile(r"\b(\d+)[lL]\b")
_RAISE_TUPLE_RE = re.compile(r"^(\s*raise\s+[A-Za-z_][\w.]*)\s*,\s*(.+?)\s*$")
_UR_PREFIX_RE = re.compile(r"\b[uU][rR](['\"])")
_BACKTICK_RE = re.compile(r"`([^`]+)`")


def decode_source(data: bytes) -> str:
    """Decode source bytes per their declared encoding, defaulting to UTF-8."""
    try:
        encoding, _ = tokenize.detect_encoding(io.BytesIO(data).readline)
    except SyntaxError:
        match = _CODING_RE.search(data[:200])
        encoding = match.group(1).decode("ascii", "replace") if match else "utf-8"
    try:
        return data.decode(encoding)
    except (LookupError, UnicodeDecodeError):
        return data.decode("utf-8", errors="replace")


def _normalize_legacy_line(line: str) -> str:
    line = line.replace("<>", "!=")
    line = _LONG_SUFFIX_RE.sub(r"\1", line)
    line = _UR_PREFIX_RE.sub(r"u\1", line)

    match = _PRINT_CHEVRON_RE.match(line)
    if match:
        indent, target, rest, trail = match.groups()
        end = ", end=' '" if trail else ""
        return f"{indent}print({rest}, file={target.strip()}{end})"
    match = _PRINT_BARE_RE.match(line)
    if match:
        return f"{match.group(1)}print()"
    match = _PRINT_STMT_RE.match(line)
    if match:
        indent, rest, trail = match.groups()
        end = ", end=' '" if trail else ""
        return f"{indent}print({rest}{end})"

    match = _EXCEPT_COMMA_RE.match(line)
    if match:
        return f"{match.group(1)} as {match.group(2)}:" + line[match.end():]
    match = _RAISE_TUPLE_RE.match(line)
    if match:
        return f"{match.group(1)}({match.group(2)})"

    line = _BACKTICK_RE.sub(r"repr(\1)", line)
    return line


def normalize_legacy_source(text: str) -> str:
    """Best-effort rewrite of legacy (2.x era) statements into modern syntax."""
    return "\n".join(_normalize_legacy_line(line) for line in text.split("\n"))


def _parse_with_fallback(text: str, module_path: str) -> ast.Module:
    try:
        return ast.parse(text)
    except SyntaxError as modern_exc:
        try:
            return ast.parse(normalize_legacy_source(text))
        except (SyntaxError, ValueError):
            raise SourceSyntaxError(
                module_path, modern_exc.lineno or 0, modern_exc.msg or ""
            ) from modern_exc
    except ValueError as exc:  # null bytes and similar non-source input
        raise SourceSyntaxError(module_path, 0, str(exc)) from exc


def _split_params(args: ast.arguments) -> tuple[tuple[str, ...], frozenset[tuple[str, bool]], bool, bool]:
    ordered = list(args.posonlyargs) + list(args.args)
    n_defaults = len(args.defaults)
    n_plain = len(ordered) - n_defaults
    positional = tuple(a.arg for a in ordered[:n_plain])
    keyword: set[tuple[str, bool]] = {(a.arg, True) for a in ordered[n_plain:]}
    for arg, default in zip(args.kwonlyargs, args.kw_defaults):
        keyword.add((arg.arg, default is not None))
    return positional, frozenset(keyword), args.vararg is not None, args.kwarg is not None


def _definition_from_node(
    node: ast.FunctionDef | ast.AsyncFunctionDef, owner_class: str | None
) -> Definition:
    positional, keyword, varargs, kwargs = _split_params(node.args)
    return Definition(
        name=node.name,
        kind=METHOD if owner_class else FUNCTION,
        positional_params=positional,
        keyword_params=keyword,
        owner_class=owner_class,
        is_underscore_named=node.name.startswith("_"),
        has_catchall_positional=varargs,
        has_catchall_keywords=kwargs,
    )


def resolve_relative(module_path: str, is_package: bool, level: int, target: str | None) -> str | None:
    """Absolutize a relative import; ``None`` when it climbs past the top."""
    if level == 0:
        return target or ""
    anchor = module_path.split(".") if is_package else module_path.split(".")[:-1]
    drop = level - 1
    if drop > len(anchor):
        return None
    base = anchor[: len(anchor) - drop]
    if target:
        return ".".join(base + target.split(".")) if base else target
    return ".".join(base) if base else None


def _extract_all(node: ast.Assign) -> tuple[str, ...] | None:
    for target in node.targets:
        if isinstance(target, ast.Name) and target.id == "__all__":
            value = node.value
            if isinstance(value, (ast.List, ast.Tuple)):
                names = []
                for element in value.elts:
                    if isinstance(element, ast.Constant) and isinstance(element.value, str):
                        names.append(element.value)
                    else:
                        return None
                return tuple(names)
    return None


class _ImportCollector:
    """Gathers import statements from every scope of one module.

    The scope tag lets downstream alias analysis keep module-level imports
    (which create re-exports) apart from lazy function-body imports (which
    bind only a local name).
    """

    def __init__(self, module_path: str, is_package: bool) -> None:
        self.module_path = module_path
        self.is_package = is_package
        self.imports: list[RawImport] = []
        self.skipped: list[str] = []

    def collect(self, body: list[ast.stmt], scope: str) -> None:
        for stmt in body:
            self._visit(stmt, scope)

    def _visit(self, node: ast.stmt, scope: str) -> None:
        if isinstance(node, ast.Import):
            for alias in node.names:
                self.imports.append(
                    RawImport(
                        form=IMPORT,
                        source_module=alias.name,
                        imported_names=((alias.name, alias.asname),),
                        line=node.lineno,
                        scope=scope,
                    )
                )
        elif isinstance(node, ast.ImportFrom):
            source = resolve_relative(
                self.module_path, self.is_package, node.level or 0, node.module
            )
            if source is None:
                self.skipped.append(f"relative_import_beyond_top:{node.lineno}")
                return
            star = any(alias.name == "*" for alias in node.names)
            if star:
                self.imports.append(
                    RawImport(
                        form=STAR_IMPORT,
                        source_module=source,
                        line=node.lineno,
                        scope=scope,
                    )
                )
                return
            names = tuple((alias.name, alias.asname) for alias in node.names)
            self.imports.append(
                RawImport(
                    form=FROM_IMPORT,
                    source_module=source,
                    imported_names=names,
                    line=node.lineno,
                    scope=scope,
                )
            )
        elif isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            self.collect(node.body, FUNCTION_SCOPE)
        elif isinstance(node, ast.ClassDef):
            self.collect(node.body, CLASS_SCOPE)
        else:
            # Compound statements (if/try/for/with/match) keep the scope of
            # their surroundings; conditional imports are recorded the same
            # as unconditional ones.
            for field_name in node._fields:
                value = getattr(node, field_name, None)
                if not isinstance(value, list):
                    continue
                for child in value:
                    if isinstance(child, ast.stmt):
                        self._visit(child, scope)
                    elif isinstance(child, (ast.ExceptHandler, ast.match_case)):
                        self.collect(child.body, scope)


def parse_source(
    text: str | bytes,
    module_path: str,
    file_path: str | None = None,
    is_package: bool = False,
) -> SourceModule:
    """Parse one source file into its structural model.

    Records every top-level function, every class with its directly declared
    methods, and every import statement (relative imports absolutized).
    Definitions inside function bodies are not addressable by dotted name and
    are skipped; unsupported constructs are counted in ``skipped_constructs``.

    Raises SourceSyntaxError when the text parses under no supported grammar.
    """
    if isinstance(text, bytes):
        text = decode_source(text)
    if file_path is None:
        suffix = "/__init__.py" if is_package else ".py"
        file_path = module_path.replace(".", "/") + suffix
    elif file_path.endswith("__init__.py"):
        is_package = True

    tree = _parse_with_fallback(text, module_path)
    definitions: list[Definition] = []
    declared_all: tuple[str, ...] | None = None
    skipped: list[str] = []

    for node in tree.body:
        if isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            definitions.append(_definition_from_node(node, owner_class=None))
        elif isinstance(node, ast.ClassDef):
            definitions.append(
                Definition(
                    name=node.name,
                    kind=CLASS,
                    is_underscore_named=node.name.startswith("_"),
                )
            )
            for child in node.body:
                if isinstance(child, (ast.FunctionDef, ast.AsyncFunctionDef)):
                    definitions.append(_definition_from_node(child, owner_class=node.name))
                elif isinstance(child, ast.ClassDef):
                    skipped.append(f"nested_class:{node.name}.{child.name}:{child.lineno}")
        elif isinstance(node, ast.Assign):
            extracted = _extract_all(node)
            if extracted is not None:
                declared_all = extracted
            elif isinstance(node.value, ast.Lambda):
                for target in node.targets:
                    if isinstance(target, ast.Name):
                        skipped.append(f"lambda_assignment:{target.id}:{node.lineno}")

    collector = _ImportCollector(module_path, is_package)
    collector.collect(tree.body, MODULE_SCOPE)
    skipped.extend(collector.skipped)

    return SourceModule(
        module_path=module_path,
        file_path=file_path,
        definitions=definitions,
        import_statements=collector.imports,
        declared_all=declared_all,
        skipped_constructs=tuple(skipped),
    )


def _normalize_path(path: str) -> str:
    return path.replace("\\", "/").lstrip("./")


def build_directory_tree(files: list[str]) -> DirectoryTree:
    """Arrange one release's files into a package/module tree.

    A directory is a package when it holds the initializer file; a directory
    without one but with an initializer somewhere below is kept as a package
    too, flagged ``implicit_namespace``.  Source files with a non-package
    directory on their path are orphans and excluded from API naming.

    Raises EmptyRelease when no module survives orphan exclusion.
    """
    py_files = sorted(
        {_normalize_path(f) for f in files if _normalize_path(f).endswith(".py")}
    )
    if not py_files:
        raise EmptyRelease("release contains no source files")

    init_dirs = {
        f[: -len("/__init__.py")] for f in py_files if f.endswith("/__init__.py") and "/" in f
    }
    package_dirs: dict[str, bool] = {}  # dir -> implicit_namespace flag
    for d in init_dirs:
        package_dirs[d] = False
        parts = d.split("/")
        for i in range(1, len(parts)):
            ancestor = "/".join(parts[:i])
            package_dirs.setdefault(ancestor, True)

    nodes: dict[str, TreeNode] = {}
    orphans: list[str] = []

    def ensure_package(dir_path: str) -> TreeNode:
        dotted = dir_path.replace("/", ".")
        node = nodes.get(dotted)
        if node is None:
            node = TreeNode(
                name=dir_path.rsplit("/", 1)[-1],
                path=dotted,
                is_package=True,
                implicit_namespace=package_dirs[dir_path],
            )
            nodes[dotted] = node
            if "/" in dir_path:
                parent = ensure_package(dir_path.rsplit("/", 1)[0])
                parent.children[node.name] = node
        return node

    top_level: list[str] = []
    for file_path in py_files:
        directory, _, filename = file_path.rpartition("/")
        if not directory or directory not in package_dirs:
            orphans.append(file_path)
            continue
        package = ensure_package(directory)
        if filename == "__init__.py":
            package.file_path = file_path
            continue
        module_name = filename[: -len(".py")]
        dotted = f"{package.path}.{module_name}"
        node = TreeNode(
            name=module_name, path=dotted, is_package=False, file_path=file_path
        )
        nodes[dotted] = node
        package.children[module_name] = node

    for dotted, node in nodes.items():
        if node.is_package and "." not in dotted and dotted not in top_level:
            top_level.append(dotted)
    top_level.sort()

    if not nodes:
        raise EmptyRelease("no package-rooted module after orphan exclusion")

    return DirectoryTree(
        root=top_level[0] if top_level else "",
        top_level_packages=tuple(top_level),
        nodes=nodes,
        orphans=tuple(orphans),
    )


def module_path_for_file(file_path: str) -> str:
    """Invert the path/name bijection for a non-orphan source file."""
    path = _normalize_path(file_path)
    if path.endswith("/__init__.py"):
        path = path[: -len("/__init__.py")]
    elif path.endswith(".py"):
        path = path[: -len(".py")]
    return path.replace("/", ".")


@dataclass(frozen=True)
class ImportEdge:
    """Re-export relation: ``name`` importable from ``source`` becomes importable from ``target``.

    ``origin_name`` keeps the spelling inside the source module when the
    re-export renames (``from x import f as g``); it equals ``name``
    otherwise.
    """

    source_module: str
    name: str
    target_module: str
    origin_name: str = ""

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("edge name must be non-empty")
        if self.source_module == self.target_module:
            raise ValueError(f"self-edge on {self.source_module!r}")
        if not self.origin_name:
            object.__setattr__(self, "origin_name", self.name)

    def sort_key(self) -> tuple[str, str, str, str]:
        return (self.source_module, self.name, self.target_module, self.origin_name)


def extract_import_edges(
    mod: SourceModule,
    star_expander=None,
    notes: list[str] | None = None,
) -> list[ImportEdge]:
    """Derive re-export edges from one module's module-level imports.

    ``from X import f`` exports ``f`` into this module; importing a name
    from the module's own package (``from . import base`` in an initializer)
    references the submodule, so the edge's source is that submodule.  Star
    imports expand through ``star_expander`` (module path -> public names)
    when the source lies inside the same release; otherwise they degrade to
    a ``star_import_unresolved`` note.  Plain imports create edges only when
    they rebind under a new name.
    """
    sink = notes if notes is not None else []
    edges: list[ImportEdge] = []

    def add(source: str, name: str, origin: str) -> None:
        if source and name and source != mod.module_path:
            edges.append(
                ImportEdge(
                    source_module=source,
                    name=name,
                    target_module=mod.module_path,
                    origin_name=origin,
                )
            )

    for imp in mod.import_statements:
        if imp.scope != MODULE_SCOPE:
            continue
        if imp.form == FROM_IMPORT:
            source = imp.source_module
            if not source:
                continue
            for name, alias in imp.imported_names:
                exported = alias or name
                if source == mod.module_path:
                    add(f"{source}.{name}", exported, name)
                else:
                    add(source, exported, name)
        elif imp.form == STAR_IMPORT:
            source = imp.source_module
            if not source or source == mod.module_path:
                sink.append(f"star_import_unresolved:{source or '?'}:{imp.line}")
                continue
            names = star_expander(source) if star_expander is not None else None
            if names is None:
                sink.append(f"star_import_unresolved:{source}:{imp.line}")
            else:
                for name in sorted(names):
                    add(source, name, name)
        else:  # plain import; only a rebinding creates a new public name
            for name, alias in imp.imported_names:
                if alias and alias != name:
                    add(name, alias, name.rsplit(".", 1)[-1])

    return edges
