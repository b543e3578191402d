"""Codebase construction: base snippets from cross-files, dependency snippets from imports."""
from .codebase import build_codebase, build_dependency_snippets, load_repo, repo_from_records
from .imports import ImportKind, ImportRef, extract_imports, filter_intra_repo, load_stdlib, resolve_module
from .signatures import DependencyInfo, find_entity
from .snippets import (
    DEFAULT_MAX_LINES,
    MiniBlock,
    Snippet,
    SnippetKind,
    SourceFile,
    aggregate_blocks,
    base_snippets,
    read_corpus_jsonl,
    split_into_miniblocks,
    write_corpus_jsonl,
)

__all__ = [
    "DEFAULT_MAX_LINES", "DependencyInfo", "ImportKind", "ImportRef", "MiniBlock", "Snippet",
    "SnippetKind", "SourceFile", "aggregate_blocks", "base_snippets", "build_codebase",
    "build_dependency_snippets", "extract_imports", "filter_intra_repo", "find_entity",
    "load_repo", "load_stdlib", "read_corpus_jsonl", "repo_from_records", "resolve_module",
    "split_into_miniblocks", "write_corpus_jsonl",
]
