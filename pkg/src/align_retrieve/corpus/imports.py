"""Import-statement extraction and intra-repository filtering."""
from __future__ import annotations

import ast
import logging
import posixpath
import re
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache
from importlib import resources
from typing import Mapping

from ..errors import InvalidInputError, InvalidParameterError
from .snippets import SourceFile

log = logging.getLogger(__name__)

Repo = Mapping[str, SourceFile]


class ImportKind(str, Enum):
    CLASS = "class"
    METHOD = "method"
    FUNCTION = "function"
    MODULE = "module"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class ImportRef:
    module: str
    entity: str = ""
    alias: str | None = None
    kind: ImportKind = ImportKind.UNKNOWN
    static: bool = False

    def __post_init__(self):
        if not self.module:
            raise InvalidInputError("ImportRef.module must be non-empty")


def language_of(path: str) -> str:
    if path.endswith(".java"):
        return "java"
    if path.endswith(".py"):
        return "python"
    return "unknown"


@lru_cache(maxsize=None)
def load_stdlib(language: str) -> frozenset[str]:
    """Bundled standard-library names (Python modules, Java package prefixes)."""
    name = {"python": "python_stdlib.txt", "java": "java_stdlib.txt"}[language]
    text = resources.files(__package__).joinpath("data", name).read_text(encoding="utf-8")
    return frozenset(ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#"))


def extract_imports(file: SourceFile, grammar: str | None = None) -> list[ImportRef]:
    """Parse import statements; returns [] and logs a warning when the file does not parse."""
    grammar = grammar or language_of(file.path)
    if grammar == "python":
        return _python_imports(file)
    if grammar == "java":
        return _java_imports(file)
    raise InvalidParameterError(f"unsupported grammar {grammar!r}")


_PY_IMPORT_LINE = re.compile(r"^[ \t]*(?:import|from)[ \t]")


def _recover_import_statements(text: str) -> tuple[list[ast.AST], int]:
    """Parse import statements one by one out of a file that does not parse as a whole.

    Returns the parsed statements and the number that failed. Unfinished code
    is usually cut mid-statement, so whole-file parsing is the exception.
    """
    lines = text.splitlines()
    nodes, failed = [], 0
    i = 0
    while i < len(lines):
        if not _PY_IMPORT_LINE.match(lines[i]):
            i += 1
            continue
        start = i
        stmt = lines[i].strip()
        while (stmt.count("(") > stmt.count(")") or stmt.endswith("\\")) and i + 1 < len(lines):
            i += 1
            stmt = stmt.rstrip("\\") + " " + lines[i].strip()
        i += 1
        try:
            mod = ast.parse(stmt)
        except SyntaxError:
            failed += 1
            continue
        for node in mod.body:
            node.lineno = start + 1
            nodes.append(node)
    return nodes, failed


def _python_imports(file: SourceFile) -> list[ImportRef]:
    try:
        nodes = list(ast.walk(ast.parse(file.text)))
    except (SyntaxError, ValueError) as exc:
        nodes, failed = _recover_import_statements(file.text)
        if failed or not nodes:
            log.warning("could not parse %s: %s", file.path, exc)
        if failed and not nodes:
            return []
    found = []
    for node in nodes:
        if isinstance(node, ast.Import):
            for a in node.names:
                found.append((node.lineno, node.col_offset, ImportRef(a.name, "", a.asname, ImportKind.MODULE)))
        elif isinstance(node, ast.ImportFrom):
            module = "." * node.level + (node.module or "")
            for a in node.names:
                if module.strip("."):
                    ref = ImportRef(module, a.name, a.asname)
                else:
                    # "from . import x": x is a sibling module
                    ref = ImportRef(module + a.name, "", a.asname, ImportKind.MODULE)
                found.append((node.lineno, node.col_offset, ref))
    # ast.walk is breadth-first; restore source order
    found.sort(key=lambda t: (t[0], t[1]))
    return [ref for _, _, ref in found]


_JAVA_IMPORT = re.compile(r"^\s*import\s+(static\s+)?([\w.]+(?:\s*\.\s*\*)?)\s*;", re.M)


def _java_imports(file: SourceFile) -> list[ImportRef]:
    from .java import mask_java

    text = mask_java(file.text)
    if text.count("{") != text.count("}"):
        log.warning("could not parse %s: unbalanced braces", file.path)
        return []
    refs = []
    for m in _JAVA_IMPORT.finditer(text):
        name = re.sub(r"\s+", "", m.group(2))
        if "." not in name:
            continue
        module, entity = name.rsplit(".", 1)
        refs.append(ImportRef(module, entity, None, static=bool(m.group(1))))
    return refs


def _python_candidates(module: str, importer: str | None) -> list[str]:
    level = len(module) - len(module.lstrip("."))
    rest = module[level:].replace(".", "/")
    if level:
        if importer is None:
            return []
        base = posixpath.dirname(importer)
        for _ in range(level - 1):
            base = posixpath.dirname(base)
        stem = posixpath.join(base, rest) if rest else base
        roots = [stem]
    else:
        roots = [rest, "src/" + rest]
    out = []
    for stem in roots:
        stem = stem.lstrip("/")
        out += [stem + ".py", stem + "/__init__.py"]
    return out


def resolve_module(ref: ImportRef, repo: Repo, importer: str | None = None,
                   language: str = "python") -> str | None:
    """Repo path of the file that defines ``ref``'s target, or None."""
    if language == "java":
        return _resolve_java(ref, repo)
    cands = _python_candidates(ref.module, importer)
    has_entity = bool(ref.entity) and ref.entity != "*"
    for c in cands:
        if c not in repo:
            continue
        if has_entity and c.endswith("__init__.py"):
            sub = c[: -len("__init__.py")] + ref.entity + ".py"
            if sub in repo and not _defines(repo[c], ref.entity):
                return sub
        return c
    if has_entity:
        # namespace package without __init__.py
        for c in cands:
            if c.endswith(".py") and not c.endswith("__init__.py"):
                sub = c[: -len(".py")] + "/" + ref.entity + ".py"
                if sub in repo:
                    return sub
    return None


def _defines(file: SourceFile, name: str) -> bool:
    return re.search(rf"^\s*(class|def|async\s+def)\s+{re.escape(name)}\b|^{re.escape(name)}\s*=",
                     file.text, re.M) is not None


def _resolve_java(ref: ImportRef, repo: Repo) -> str | None:
    base = ref.module.replace(".", "/")
    suffixes = []
    if ref.entity and ref.entity != "*":
        suffixes.append(base + "/" + ref.entity + ".java")
    suffixes.append(base + ".java")
    for suffix in suffixes:
        hits = sorted(p for p in repo if p == suffix or p.endswith("/" + suffix))
        if hits:
            return hits[0]
    return None


def is_stdlib(ref: ImportRef, stdlib: frozenset[str], language: str = "python") -> bool:
    if ref.module.startswith("."):
        return False
    if language == "java":
        return any(ref.module == p or ref.module.startswith(p + ".") for p in stdlib)
    return ref.module.split(".")[0] in stdlib


def filter_intra_repo(imports: list[ImportRef], repo: Repo, stdlib: frozenset[str] | None = None,
                      importer: str | None = None, language: str = "python") -> list[ImportRef]:
    """Keep imports that resolve to a repository file and are not standard library.

    Anything that resolves to neither the repository nor the standard library
    is treated as third-party and dropped as well.
    """
    if stdlib is None:
        stdlib = load_stdlib(language)
    return [r for r in imports
            if not is_stdlib(r, stdlib, language)
            and resolve_module(r, repo, importer, language) is not None]
