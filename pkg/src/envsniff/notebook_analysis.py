"""Notebook-side analysis: cells in, standardized third-party API usages out.

Code cells are extracted in document order, stripped of kernel-only syntax
(magics, shell escapes, help suffixes), and walked top-down with one shared
symbol table.  Every reference that roots in a third-party import is
rewritten to its fully-qualified dotted form: alias bindings are undone,
from-import prefixes re-attached, and instance method calls traced back to
the constructor that produced the receiver.

Nothing here executes notebook code; the walker is purely syntactic plus a
per-notebook symbol table.
"""

from __future__ import annotations

import ast
import json
import re
from dataclasses import dataclass, field

from .api_bank import REFERENCE_ONLY, CallSignature
from .stdlib_tables import BUILTIN_NAMES, TABLES

DIRECT_CALL = "direct_call"
ALIAS_CALL = "alias_call"
INSTANCE_METHOD = "instance_method"
ATTRIBUTE_ACCESS = "attribute_access"

LOCAL = "local"
STDLIB = "stdlib"
LIBRARY = "library"


class MalformedNotebook(Exception):
    """The document is not a usable notebook structure."""

    def __init__(self, reason: str) -> None:
        self.reason = reason
        super().__init__(reason)


@dataclass(frozen=True)
class CodeCell:
    """One code cell; ``position`` is its 0-based order among code cells."""

    position: int
    execution_count: int | None
    source: str


@dataclass(frozen=True)
class SkipReport:
    """Gaps in recorded execution counters (cells re-run out of order)."""

    has_skips: bool
    missing_counters: tuple[int, ...]
    max_counter: int
    executed_cells: int


@dataclass(frozen=True)
class UsageRecord:
    """One standardized third-party API usage."""

    fqn: str
    call: CallSignature | str
    cell_position: int
    origin: str
    low_confidence: bool = False

    def __post_init__(self) -> None:
        if not self.fqn:
            raise ValueError("usage fqn must be non-empty")


@dataclass
class UsageSet:
    """Everything extracted from one notebook."""

    usages: frozenset[UsageRecord] = frozenset()
    imported_top_levels: frozenset[str] = frozenset()
    local_names: frozenset[str] = frozenset()
    unresolved: frozenset[str] = frozenset()
    stdlib_hints: dict[str, tuple[str, ...]] = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    def to_report(self) -> dict:
        def call_repr(call: CallSignature | str):
            if isinstance(call, CallSignature):
                return {
                    "positional_count": call.positional_count,
                    "keyword_names": list(call.keyword_names),
                }
            return call

        return {
            "usages": [
                {
                    "fqn": u.fqn,
                    "call": call_repr(u.call),
                    "cell": u.cell_position,
                    "origin": u.origin,
                    "low_confidence": u.low_confidence,
                }
                for u in sorted(self.usages, key=lambda u: (u.cell_position, u.fqn))
            ],
            "imported_top_levels": sorted(self.imported_top_levels),
            "local_names": sorted(self.local_names),
            "unresolved": sorted(self.unresolved),
            "stdlib_hints": {k: list(v) for k, v in sorted(self.stdlib_hints.items())},
            "notes": list(self.notes),
        }


def _cell_source(raw) -> str:
    if isinstance(raw, list):
        return "".join(raw)
    if isinstance(raw, str):
        return raw
    raise MalformedNotebook(f"cell source has type {type(raw).__name__}")


def _coerce_counter(raw) -> int | None:
    if isinstance(raw, int) and not isinstance(raw, bool) and raw >= 1:
        return raw
    return None


def load_notebook(document: str | bytes | dict) -> list[CodeCell]:
    """Extract the code cells of a notebook document, in document order.

    Accepts format 4.x documents (top-level ``cells``) and, best effort,
    3.x documents (``worksheets``).  Markdown and raw cells are dropped;
    list-form sources are joined.
    """
    if isinstance(document, (str, bytes)):
        try:
            document = json.loads(document)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise MalformedNotebook(f"not valid JSON: {exc}") from exc
    if not isinstance(document, dict):
        raise MalformedNotebook(f"top level has type {type(document).__name__}")

    if "cells" in document:
        raw_cells = document["cells"]
    elif "worksheets" in document:
        raw_cells = []
        worksheets = document["worksheets"]
        if not isinstance(worksheets, list):
            raise MalformedNotebook("worksheets is not a list")
        for sheet in worksheets:
            raw_cells.extend(sheet.get("cells", []))
    else:
        raise MalformedNotebook("document has neither cells nor worksheets")
    if not isinstance(raw_cells, list):
        raise MalformedNotebook("cells is not a list")

    cells: list[CodeCell] = []
    for raw in raw_cells:
        if not isinstance(raw, dict):
            raise MalformedNotebook("cell is not an object")
        if raw.get("cell_type") != "code":
            continue
        source = _cell_source(raw.get("source", raw.get("input", "")))
        counter = _coerce_counter(raw.get("execution_count", raw.get("prompt_number")))
        cells.append(CodeCell(position=len(cells), execution_count=counter, source=source))
    return cells


def execution_counter_skips(cells: list[CodeCell]) -> SkipReport:
    """Detect counter gaps left behind by out-of-order or repeated execution."""
    counters = sorted(c.execution_count for c in cells if c.execution_count is not None)
    if not counters:
        return SkipReport(False, (), 0, 0)
    max_counter = counters[-1]
    missing = tuple(sorted(set(range(1, max_counter + 1)) - set(counters)))
    return SkipReport(
        has_skips=max_counter > len(counters),
        missing_counters=missing,
        max_counter=max_counter,
        executed_cells=len(counters),
    )


# Cell magics whose body is ordinary code and survives sanitization.
_PASSTHROUGH_CELL_MAGICS = {"time", "timeit", "capture", "prun"}

_SHELL_ASSIGN_RE = re.compile(r"^\s*[\w.,\s\[\]\(\)]+=\s*!")
_HELP_SUFFIX_RE = re.compile(r"^\s*[\w.\[\]\(\)'\"]+\s*\?{1,2}\s*$")


def sanitize_cell(source: str, notes: list[str] | None = None) -> str:
    """Strip kernel-only syntax from one cell, keeping real code intact.

    Line magics, shell escapes, and help suffixes vanish line by line; a
    leading cell magic removes the whole body unless it merely wraps code
    (timing and capture magics).  The result either parses or is the empty
    string; a non-parsing remainder excludes the cell with a note.
    """
    sink = notes if notes is not None else []
    lines = source.split("\n")

    first_code = next((i for i, line in enumerate(lines) if line.strip()), None)
    if first_code is not None and lines[first_code].lstrip().startswith("%%"):
        magic = lines[first_code].lstrip()[2:].split(None, 1)[0] if lines[first_code].lstrip()[2:] else ""
        if magic in _PASSTHROUGH_CELL_MAGICS:
            sink.append(f"cell_magic_unwrapped:{magic}")
            lines = lines[:first_code] + lines[first_code + 1 :]
        else:
            sink.append(f"cell_magic_removed:{magic}")
            return ""

    kept: list[str] = []
    dropped = False
    for line in lines:
        stripped = line.lstrip()
        if stripped.startswith(("%", "!")):
            sink.append(
                "shell_escape_removed" if stripped.startswith("!") else "magic_removed"
            )
            dropped = True
            continue
        if _SHELL_ASSIGN_RE.match(line):
            sink.append("shell_escape_removed")
            dropped = True
            continue
        if _HELP_SUFFIX_RE.match(line) and "?" in line:
            sink.append("help_suffix_removed")
            dropped = True
            continue
        kept.append(line)

    text = "\n".join(kept)
    if not text.strip():
        return "" if dropped else text
    try:
        ast.parse(text)
    except (SyntaxError, ValueError):  # ValueError: e.g. null bytes
        sink.append("cell_excluded_unparseable")
        return ""
    return text


def classify_name(
    name: str,
    local_defs,
    imports,
    stdlib_table=None,
) -> str:
    """Coarse origin of one dotted name: local, stdlib, or library.

    ``local_defs`` holds names defined anywhere in the notebook;
    ``imports`` maps binding names to the module paths they stand for.
    A root counts as stdlib when any supported interpreter line ships it
    (or it is a builtin that was never rebound).
    """
    root = name.split(".")[0]
    if root in local_defs:
        return LOCAL
    imports = imports or {}
    resolved_root = str(imports.get(root, root)).split(".")[0]
    tables = stdlib_table if stdlib_table is not None else TABLES
    if not isinstance(tables, dict):
        tables = {"custom": frozenset(tables)}
    if any(resolved_root in table for table in tables.values()):
        return STDLIB
    if root in BUILTIN_NAMES and root not in imports:
        return STDLIB
    return LIBRARY


# --- the usage walker -------------------------------------------------------

_MODULE = "module"
_SYMBOL = "symbol"
_INSTANCE = "instance"
_LOCAL = "local"


@dataclass(frozen=True)
class _Binding:
    kind: str
    path: str | None = None
    aliased: bool = False


class _NotebookWalker:
    """Single shared symbol table over all code cells, processed top-down."""

    def __init__(self, tables: dict[str, frozenset[str]], sibling_names: frozenset[str]):
        self.tables = tables
        self.all_lines = tuple(sorted(tables))
        self.sibling_names = sibling_names
        self.bindings: dict[str, _Binding] = {}
        self.star_modules: list[str] = []
        self.top_levels: set[str] = set()
        self.local_names: set[str] = set()
        self.unresolved: set[str] = set()
        self.stdlib_hints: dict[str, tuple[str, ...]] = {}
        self.usages: list[UsageRecord] = []
        self.scopes: list[set[str]] = []

    # -- classification helpers ---------------------------------------

    def _is_stdlib_root(self, root: str) -> bool:
        lines = tuple(l for l in self.all_lines if root in self.tables[l])
        if not lines:
            return False
        if lines != self.all_lines:
            self.stdlib_hints.setdefault(root, lines)
        return True

    def _declare_local(self, name: str) -> None:
        if self.scopes:
            self.scopes[-1].add(name)
            return
        self.bindings[name] = _Binding(_LOCAL)
        self.local_names.add(name)

    def _lookup(self, name: str) -> _Binding | None:
        for scope in reversed(self.scopes):
            if name in scope:
                return _Binding(_LOCAL)
        return self.bindings.get(name)

    # -- reference resolution -------------------------------------------

    def _chain_parts(self, expr: ast.expr) -> tuple[list[str], ast.expr]:
        """Peel an attribute chain; returns (reversed attrs, base expression)."""
        attrs: list[str] = []
        node = expr
        while isinstance(node, ast.Attribute):
            attrs.append(node.attr)
            node = node.value
        attrs.reverse()
        return attrs, node

    def _resolve_target(self, expr: ast.expr, position: int) -> tuple[str, str] | None:
        """Resolve a Name/Attribute chain to (fqn, origin); None if not a library reference."""
        attrs, base = self._chain_parts(expr)
        if isinstance(base, ast.Name):
            binding = self._lookup(base.id)
            if binding is None:
                return self._resolve_unbound(base.id, attrs)
            if binding.kind == _LOCAL:
                return None
            if binding.kind == _MODULE:
                parts = [binding.path] + attrs
                if len(parts) < 2:
                    return None
                fqn = ".".join(parts)
                origin = ALIAS_CALL if binding.aliased else DIRECT_CALL
            elif binding.kind == _SYMBOL:
                fqn = ".".join([binding.path] + attrs)
                origin = ALIAS_CALL
            else:  # instance
                if not attrs:
                    return None
                fqn = ".".join([binding.path] + attrs)
                origin = INSTANCE_METHOD
            root = fqn.split(".")[0]
            if self._is_stdlib_root(root):
                return None
            return fqn, origin
        if isinstance(base, ast.Call) and attrs:
            inner = self._resolve_target(base.func, position)
            if inner is None:
                return None
            inner_fqn, _ = inner
            return ".".join([inner_fqn] + attrs), INSTANCE_METHOD
        return None

    def _resolve_unbound(self, root: str, attrs: list[str]) -> None:
        if root in BUILTIN_NAMES or self._is_stdlib_root(root):
            return None
        self.unresolved.add(root)
        return None

    @staticmethod
    def _call_signature(node: ast.Call) -> CallSignature:
        keywords = tuple(sorted({kw.arg for kw in node.keywords if kw.arg is not None}))
        positional = sum(1 for a in node.args if not isinstance(a, ast.Starred))
        return CallSignature(positional_count=positional, keyword_names=keywords)

    # -- expression walking -----------------------------------------------

    def visit_expr(self, node: ast.expr | None, position: int) -> None:
        if node is None:
            return
        if isinstance(node, ast.Call):
            self._visit_call(node, position)
            return
        if isinstance(node, (ast.Attribute, ast.Name)):
            if isinstance(getattr(node, "ctx", ast.Load()), ast.Load):
                resolved = self._resolve_target(node, position)
                if resolved is not None:
                    fqn, _ = resolved
                    if "." in fqn:
                        self.usages.append(
                            UsageRecord(fqn, REFERENCE_ONLY, position, ATTRIBUTE_ACCESS)
                        )
            if isinstance(node, ast.Attribute):
                attrs, base = self._chain_parts(node)
                if not isinstance(base, ast.Name):
                    self.visit_expr(base, position)
            return
        if isinstance(node, ast.Lambda):
            params = {a.arg for a in node.args.args + node.args.posonlyargs + node.args.kwonlyargs}
            if node.args.vararg:
                params.add(node.args.vararg.arg)
            if node.args.kwarg:
                params.add(node.args.kwarg.arg)
            for default in node.args.defaults + [d for d in node.args.kw_defaults if d]:
                self.visit_expr(default, position)
            self.scopes.append(params)
            self.visit_expr(node.body, position)
            self.scopes.pop()
            return
        if isinstance(node, (ast.ListComp, ast.SetComp, ast.GeneratorExp, ast.DictComp)):
            bound: set[str] = set()
            for comp in node.generators:
                self.visit_expr(comp.iter, position)
                bound.update(self._target_names(comp.target))
            self.scopes.append(bound)
            for comp in node.generators:
                for condition in comp.ifs:
                    self.visit_expr(condition, position)
            if isinstance(node, ast.DictComp):
                self.visit_expr(node.key, position)
                self.visit_expr(node.value, position)
            else:
                self.visit_expr(node.elt, position)
            self.scopes.pop()
            return
        for child in ast.iter_child_nodes(node):
            if isinstance(child, ast.expr):
                self.visit_expr(child, position)

    def _visit_call(self, node: ast.Call, position: int) -> None:
        resolved = self._resolve_target(node.func, position)
        if resolved is not None:
            fqn, origin = resolved
            if "." in fqn:
                self.usages.append(
                    UsageRecord(fqn, self._call_signature(node), position, origin)
                )
        attrs, base = self._chain_parts(node.func)
        if resolved is None and isinstance(base, ast.Name) and not attrs:
            if (
                self._lookup(base.id) is None
                and base.id not in BUILTIN_NAMES
                and not any(base.id in self.tables[l] for l in self.all_lines)
                and self.star_modules
            ):
                for star_module in self.star_modules:
                    self.usages.append(
                        UsageRecord(
                            f"{star_module}.{base.id}",
                            self._call_signature(node),
                            position,
                            ALIAS_CALL,
                            low_confidence=True,
                        )
                    )
                self.unresolved.discard(base.id)
        if not isinstance(base, ast.Name):
            # Chained receivers (constructor calls, subscripts) carry their
            # own usages and arguments; the chain head was handled above.
            self.visit_expr(base, position)
        for arg in node.args:
            self.visit_expr(arg.value if isinstance(arg, ast.Starred) else arg, position)
        for keyword in node.keywords:
            self.visit_expr(keyword.value, position)

    # -- statement walking -----------------------------------------------

    def _target_names(self, target: ast.expr) -> list[str]:
        if isinstance(target, ast.Name):
            return [target.id]
        if isinstance(target, (ast.Tuple, ast.List)):
            names: list[str] = []
            for element in target.elts:
                names.extend(self._target_names(element))
            return names
        if isinstance(target, ast.Starred):
            return self._target_names(target.value)
        return []

    def _bind_assignment(self, name: str, value: ast.expr, position: int) -> None:
        if isinstance(value, ast.Call):
            resolved = self._resolve_target(value.func, position)
            if resolved is not None:
                fqn, _ = resolved
                if self.scopes:
                    self.scopes[-1].add(name)
                else:
                    self.bindings[name] = _Binding(_INSTANCE, fqn)
                return
        elif isinstance(value, ast.Name):
            binding = self._lookup(value.id)
            if binding is not None and binding.kind != _LOCAL and not self.scopes:
                self.bindings[name] = binding
                return
        elif isinstance(value, ast.Attribute):
            resolved = self._resolve_target(value, position)
            if resolved is not None and not self.scopes:
                self.bindings[name] = _Binding(_SYMBOL, resolved[0], aliased=True)
                return
        self._declare_local(name)

    def _handle_import(self, node: ast.Import, position: int) -> None:
        for alias in node.names:
            root = alias.name.split(".")[0]
            bound = alias.asname or root
            if root in self.sibling_names:
                self._declare_local(bound)
                continue
            self.top_levels.add(root)
            path = alias.name if alias.asname else root
            self.bindings[bound] = _Binding(_MODULE, path, aliased=alias.asname is not None)

    def _handle_import_from(self, node: ast.ImportFrom, position: int) -> None:
        if node.level and node.level > 0:
            # Relative imports have no anchor inside a notebook.
            for alias in node.names:
                if alias.name != "*":
                    self._declare_local(alias.asname or alias.name)
            return
        source = node.module or ""
        root = source.split(".")[0]
        if root in self.sibling_names:
            for alias in node.names:
                if alias.name != "*":
                    self._declare_local(alias.asname or alias.name)
            return
        if any(alias.name == "*" for alias in node.names):
            self.top_levels.add(root)
            if source and source not in self.star_modules:
                self.star_modules.append(source)
            return
        self.top_levels.add(root)
        for alias in node.names:
            bound = alias.asname or alias.name
            self.bindings[bound] = _Binding(_SYMBOL, f"{source}.{alias.name}", aliased=True)

    def visit_stmt(self, node: ast.stmt, position: int) -> None:
        if isinstance(node, ast.Import):
            self._handle_import(node, position)
        elif isinstance(node, ast.ImportFrom):
            self._handle_import_from(node, position)
        elif isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef)):
            for decorator in node.decorator_list:
                self.visit_expr(decorator, position)
            for default in node.args.defaults + [d for d in node.args.kw_defaults if d]:
                self.visit_expr(default, position)
            self._declare_local(node.name)
            params = {a.arg for a in node.args.args + node.args.posonlyargs + node.args.kwonlyargs}
            if node.args.vararg:
                params.add(node.args.vararg.arg)
            if node.args.kwarg:
                params.add(node.args.kwarg.arg)
            params |= self._assigned_names(node.body)
            self.scopes.append(params)
            for stmt in node.body:
                self.visit_stmt(stmt, position)
            self.scopes.pop()
        elif isinstance(node, ast.ClassDef):
            for decorator in node.decorator_list:
                self.visit_expr(decorator, position)
            for base in node.bases:
                self.visit_expr(base, position)
            for keyword in node.keywords:
                self.visit_expr(keyword.value, position)
            self._declare_local(node.name)
            self.scopes.append(self._assigned_names(node.body))
            for stmt in node.body:
                self.visit_stmt(stmt, position)
            self.scopes.pop()
        elif isinstance(node, ast.Assign):
            self.visit_expr(node.value, position)
            for target in node.targets:
                if isinstance(target, ast.Name):
                    self._bind_assignment(target.id, node.value, position)
                else:
                    for name in self._target_names(target):
                        self._declare_local(name)
                    if isinstance(target, ast.Subscript):
                        self.visit_expr(target.value, position)
                        self.visit_expr(target.slice, position)
                    elif isinstance(target, ast.Attribute):
                        self.visit_expr(target.value, position)
        elif isinstance(node, ast.AnnAssign):
            self.visit_expr(node.value, position)
            if isinstance(node.target, ast.Name):
                if node.value is not None:
                    self._bind_assignment(node.target.id, node.value, position)
                else:
                    self._declare_local(node.target.id)
        elif isinstance(node, ast.AugAssign):
            self.visit_expr(node.value, position)
            if isinstance(node.target, ast.Name):
                self._declare_local(node.target.id)
        elif isinstance(node, (ast.For, ast.AsyncFor)):
            self.visit_expr(node.iter, position)
            for name in self._target_names(node.target):
                self._declare_local(name)
            for stmt in node.body + node.orelse:
                self.visit_stmt(stmt, position)
        elif isinstance(node, (ast.With, ast.AsyncWith)):
            for item in node.items:
                self.visit_expr(item.context_expr, position)
                if item.optional_vars is not None:
                    for name in self._target_names(item.optional_vars):
                        self._declare_local(name)
            for stmt in node.body:
                self.visit_stmt(stmt, position)
        elif isinstance(node, ast.Try):
            for stmt in node.body:
                self.visit_stmt(stmt, position)
            for handler in node.handlers:
                if handler.type is not None:
                    self.visit_expr(handler.type, position)
                if handler.name:
                    self._declare_local(handler.name)
                for stmt in handler.body:
                    self.visit_stmt(stmt, position)
            for stmt in node.orelse + node.finalbody:
                self.visit_stmt(stmt, position)
        elif isinstance(node, (ast.If, ast.While)):
            self.visit_expr(node.test, position)
            for stmt in node.body + node.orelse:
                self.visit_stmt(stmt, position)
        else:
            for child in ast.iter_child_nodes(node):
                if isinstance(child, ast.expr):
                    self.visit_expr(child, position)
                elif isinstance(child, ast.stmt):
                    self.visit_stmt(child, position)
                elif isinstance(child, ast.match_case):
                    for stmt in child.body:
                        self.visit_stmt(stmt, position)

    def _assigned_names(self, body: list[ast.stmt]) -> set[str]:
        names: set[str] = set()
        for node in ast.walk(ast.Module(body=body, type_ignores=[])):
            if isinstance(node, ast.Assign):
                for target in node.targets:
                    names.update(self._target_names(target))
            elif isinstance(node, (ast.AnnAssign, ast.AugAssign)):
                names.update(self._target_names(node.target))
            elif isinstance(node, (ast.For, ast.AsyncFor)):
                names.update(self._target_names(node.target))
            elif isinstance(node, (ast.FunctionDef, ast.AsyncFunctionDef, ast.ClassDef)):
                names.add(node.name)
        return names


def _sibling_local_names(notebook_dir) -> frozenset[str]:
    if notebook_dir is None:
        return frozenset()
    import os

    names: set[str] = set()
    try:
        for entry in os.listdir(notebook_dir):
            full = os.path.join(notebook_dir, entry)
            if entry.endswith(".py") and os.path.isfile(full):
                names.add(entry[:-3])
            elif os.path.isdir(full) and os.path.isfile(os.path.join(full, "__init__.py")):
                names.add(entry)
    except OSError:
        return frozenset()
    return frozenset(names)


def collect_usages(
    cells: list[CodeCell],
    stdlib_table: dict[str, frozenset[str]] | None = None,
    notebook_dir: str | None = None,
) -> UsageSet:
    """Walk sanitized cells top-down and standardize every library reference.

    Cells share one symbol table, so a binding made in an early cell shapes
    resolution in later ones and a local redefinition shadows an import from
    its definition point onward.  References that resolve to neither a local
    name, the standard library, nor an import land in ``unresolved``.
    """
    tables = stdlib_table if stdlib_table is not None else TABLES
    walker = _NotebookWalker(tables, _sibling_local_names(notebook_dir))
    notes: list[str] = []

    for cell in cells:
        cleaned = sanitize_cell(cell.source, notes)
        if not cleaned.strip():
            continue
        try:
            tree = ast.parse(cleaned)
        except SyntaxError:  # sanitize_cell guarantees this cannot happen
            notes.append("cell_excluded_unparseable")
            continue
        for stmt in tree.body:
            walker.visit_stmt(stmt, cell.position)

    usage_roots = {u.fqn.split(".")[0] for u in walker.usages}
    return UsageSet(
        usages=frozenset(walker.usages),
        imported_top_levels=frozenset(walker.top_levels),
        local_names=frozenset(walker.local_names - usage_roots),
        unresolved=frozenset(walker.unresolved),
        stdlib_hints=dict(walker.stdlib_hints),
        notes=tuple(notes),
    )


def trace_instance_calls(cells: list[CodeCell]) -> list[UsageRecord]:
    """Instance-method usages only, ordered by cell position then name."""
    usage_set = collect_usages(cells)
    traced = [u for u in usage_set.usages if u.origin == INSTANCE_METHOD]
    return sorted(traced, key=lambda u: (u.cell_position, u.fqn))
