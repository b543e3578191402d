"""Assemble the retrieval codebase for one completion task."""
from __future__ import annotations

import logging
import posixpath
from pathlib import Path
from typing import Mapping

from ..errors import InvalidInputError
from .imports import ImportKind, ImportRef, Repo, extract_imports, filter_intra_repo, language_of, resolve_module
from .signatures import find_entity
from .snippets import DEFAULT_MAX_LINES, Snippet, SnippetKind, SourceFile, base_snippets

log = logging.getLogger(__name__)

SOURCE_SUFFIXES = (".py", ".java")


def load_repo(root: str | Path, suffixes=SOURCE_SUFFIXES) -> dict[str, SourceFile]:
    """Read every source file under ``root`` keyed by its posix relative path."""
    root = Path(root)
    if not root.is_dir():
        raise InvalidInputError(f"not a directory: {root}")
    repo = {}
    for p in sorted(root.rglob("*")):
        if p.is_file() and p.suffix in suffixes:
            rel = p.relative_to(root).as_posix()
            repo[rel] = SourceFile.from_text(rel, p.read_text(encoding="utf-8", errors="replace"))
    return repo


def repo_from_records(files) -> dict[str, SourceFile]:
    """Build a repo mapping from ``[{"path", "content"}]`` records."""
    return {f["path"]: SourceFile.from_text(f["path"], f["content"]) for f in files}


def build_dependency_snippets(imports: list[ImportRef], repo: Repo, grammar: str = "python",
                              importer: str | None = None) -> list[Snippet]:
    """One snippet per imported class, plus one snippet aggregating all imported functions."""
    class_snips: list[Snippet] = []
    seen: set[str] = set()
    func_sigs: list[str] = []
    func_paths: list[str] = []
    for ref in imports:
        if not ref.entity or ref.entity == "*":
            continue
        path = resolve_module(ref, repo, importer, grammar)
        if path is None:
            log.warning("cannot resolve module %s", ref.module)
            continue
        if posixpath.splitext(posixpath.basename(path))[0] == ref.entity and grammar == "python":
            continue  # "from pkg import module"
        info = find_entity(repo[path], ref.entity)
        if info is None:
            log.warning("entity %s not found in %s", ref.entity, path)
            continue
        if info.kind == ImportKind.CLASS:
            sid = f"dep:{path}::{info.name}"
            if sid not in seen:
                seen.add(sid)
                class_snips.append(Snippet(sid, SnippetKind.DEPENDENCY, path, info.render()))
        elif info.signature not in func_sigs:
            func_sigs.append(info.signature)
            if path not in func_paths:
                func_paths.append(path)
    if func_sigs:
        class_snips.append(Snippet("dep::functions", SnippetKind.DEPENDENCY,
                                   ";".join(func_paths), "\n".join(func_sigs)))
    return class_snips


def build_codebase(repo: Mapping[str, SourceFile], completion_file: str,
                   max_lines: int = DEFAULT_MAX_LINES, include_dependencies: bool = True,
                   completion_source: SourceFile | None = None) -> list[Snippet]:
    """Base snippets of every cross-file followed by the completion file's dependency snippets.

    ``completion_source`` overrides the on-disk completion file (e.g. with only
    the unfinished left context), so imports come from what the user has typed.
    """
    if completion_file not in repo and completion_source is None:
        raise InvalidInputError(f"completion file {completion_file!r} not in repository")
    snippets = []
    for path in sorted(repo):
        if path != completion_file:
            snippets.extend(base_snippets(repo[path], max_lines))
    if include_dependencies:
        src = completion_source or repo[completion_file]
        lang = language_of(completion_file)
        if lang != "unknown":
            imports = filter_intra_repo(extract_imports(src, lang), repo, importer=completion_file,
                                        language=lang)
            snippets.extend(build_dependency_snippets(imports, repo, lang, completion_file))
    return snippets
