"""Entity lookup and signature rendering for dependency snippets."""
from __future__ import annotations

import ast
import logging
from dataclasses import dataclass, field

from ..errors import InvalidInputError
from . import java
from .imports import ImportKind, language_of
from .snippets import SourceFile

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class DependencyInfo:
    """Signatures describing one imported entity.

    Classes fill the class/method/nested fields; functions and methods
    carry a single ``signature``.
    """
    kind: ImportKind
    name: str
    class_signature: str = ""
    method_signatures: tuple[str, ...] = ()
    nested_class_signatures: tuple[str, ...] = ()
    nested_method_signatures: tuple[str, ...] = ()
    signature: str = ""
    # render order for nested members: (class signature, its methods) pairs
    nested: tuple[tuple[str, tuple[str, ...]], ...] = field(default=(), repr=False)

    def __post_init__(self):
        if not (self.class_signature or self.signature):
            raise InvalidInputError("DependencyInfo needs at least one signature")

    def render(self) -> str:
        if self.kind != ImportKind.CLASS:
            return self.signature
        out = [self.class_signature, *self.method_signatures]
        for cls_sig, methods in self.nested:
            out.append(cls_sig)
            out.extend(methods)
        return "\n".join(out)


# -- Python ---------------------------------------------------------------

def _python_header(lines: tuple[str, ...], node: ast.AST, base_col: int) -> str:
    """Source of a def/class header up to and including its colon."""
    row, col = node.lineno - 1, node.col_offset
    depth = 0
    quote = None
    out = []
    first = True
    while row < len(lines):
        line = lines[row]
        start = col if first else 0
        i = start
        while i < len(line):
            ch = line[i]
            if quote:
                if ch == "\\":
                    i += 1
                elif line.startswith(quote, i):
                    i += len(quote) - 1
                    quote = None
            elif ch in "\"'":
                quote = line[i:i + 3] if line[i:i + 3] in ('"""', "'''") else ch
                i += len(quote) - 1
            elif ch == "#":
                break
            elif ch in "([{":
                depth += 1
            elif ch in ")]}":
                depth -= 1
            elif ch == ":" and depth == 0:
                out.append(" " * max(col - base_col, 0) + line[col:i + 1] if first else line[: i + 1])
                return "\n".join(out)
            i += 1
        out.append(" " * max(col - base_col, 0) + line[col:].rstrip() if first else line.rstrip())
        first = False
        row += 1
    return "\n".join(out)


def _py_member_sig(lines, node, base_col):
    return _python_header(lines, node, base_col)


_FUNCS = (ast.FunctionDef, ast.AsyncFunctionDef)


def _python_class_info(lines, node: ast.ClassDef) -> DependencyInfo:
    base = node.col_offset
    methods = tuple(_py_member_sig(lines, m, base) for m in node.body if isinstance(m, _FUNCS))
    nested = []

    def walk(cls):
        for m in cls.body:
            if isinstance(m, ast.ClassDef):
                sig = _py_member_sig(lines, m, base)
                ms = tuple(_py_member_sig(lines, f, base) for f in m.body if isinstance(f, _FUNCS))
                nested.append((sig, ms))
                walk(m)

    walk(node)
    return DependencyInfo(
        ImportKind.CLASS, node.name,
        class_signature=_python_header(lines, node, base),
        method_signatures=methods,
        nested_class_signatures=tuple(s for s, _ in nested),
        nested_method_signatures=tuple(m for _, ms in nested for m in ms),
        nested=tuple(nested),
    )


def _python_entity(file: SourceFile, name: str) -> DependencyInfo | None:
    try:
        tree = ast.parse(file.text)
    except (SyntaxError, ValueError) as exc:
        log.warning("could not parse %s: %s", file.path, exc)
        return None
    for node in tree.body:
        if isinstance(node, ast.ClassDef) and node.name == name:
            return _python_class_info(file.lines, node)
        if isinstance(node, _FUNCS) and node.name == name:
            return DependencyInfo(ImportKind.FUNCTION, name,
                                  signature=_python_header(file.lines, node, node.col_offset))
    return None


# -- Java -----------------------------------------------------------------

def _java_class_info(decl: java.JavaDecl) -> DependencyInfo:
    methods = tuple("    " + m.header for m in decl.children if m.kind == "method")
    nested = []

    def walk(cls, indent):
        for c in cls.children:
            if c.kind == "class":
                ms = tuple(" " * (indent + 4) + m.header for m in c.children if m.kind == "method")
                nested.append((" " * indent + c.header, ms))
                walk(c, indent + 4)

    walk(decl, 4)
    return DependencyInfo(
        ImportKind.CLASS, decl.name,
        class_signature=decl.header,
        method_signatures=methods,
        nested_class_signatures=tuple(s for s, _ in nested),
        nested_method_signatures=tuple(m for _, ms in nested for m in ms),
        nested=tuple(nested),
    )


def _java_find(decls, name, want_method):
    for d in decls:
        if d.name == name and (d.kind == "method") == want_method:
            return d
        hit = _java_find(d.children, name, want_method)
        if hit is not None:
            return hit
    return None


def _java_entity(file: SourceFile, name: str) -> DependencyInfo | None:
    roots = java.outline(file.text)
    cls = _java_find(roots, name, want_method=False)
    if cls is not None:
        return _java_class_info(cls)
    method = _java_find(roots, name, want_method=True)
    if method is not None:
        return DependencyInfo(ImportKind.METHOD, name, signature=method.header)
    return None


def find_entity(file: SourceFile, name: str) -> DependencyInfo | None:
    """Locate ``name`` in ``file`` and collect its signatures; None if absent."""
    lang = language_of(file.path)
    if lang == "python":
        return _python_entity(file, name)
    if lang == "java":
        return _java_entity(file, name)
    return None
