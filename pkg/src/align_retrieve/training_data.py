"""Training-sample construction from raw repositories.

Files are grouped into import-connected clusters, ordered dependency-first,
and a target span is cut from one of the dependent files.
"""
from __future__ import annotations

import json
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping, Sequence

import networkx as nx

from .corpus.imports import extract_imports, filter_intra_repo, language_of, resolve_module
from .corpus.snippets import SourceFile
from .errors import ClusterUnusableError, InvalidInputError
from .retrieval import tokenize
from .seeding import named_rng

MIN_TARGET_TOKENS = 16
MAX_TARGET_TOKENS = 96
EDGE_MARGIN = 0.10

_WORD = re.compile(r"[A-Za-z0-9]+")


@dataclass(frozen=True)
class FileDependencyGraph:
    nodes: tuple[str, ...]
    edges: frozenset[tuple[str, str]]  # (a, b): a imports from b

    def __post_init__(self):
        names = set(self.nodes)
        for a, b in self.edges:
            if a == b or a not in names or b not in names:
                raise InvalidInputError(f"bad edge {a} -> {b}")


@dataclass(frozen=True)
class RepoCluster:
    files: tuple[str, ...]
    edges: frozenset[tuple[str, str]]


@dataclass(frozen=True)
class TrainingSample:
    repo_id: str
    completion_file: str
    unfinished_code: str
    target: str
    suffix: str
    cross_files: tuple[tuple[str, str], ...]
    seed: int

    def to_record(self) -> dict:
        return {
            "repo_id": self.repo_id,
            "completion_file": self.completion_file,
            "unfinished_code": self.unfinished_code,
            "target": self.target,
            "cross_files": [{"path": p, "content": c} for p, c in self.cross_files],
            "seed": self.seed,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "TrainingSample":
        return cls(rec["repo_id"], rec["completion_file"], rec["unfinished_code"], rec["target"],
                   rec.get("suffix", ""),
                   tuple((f["path"], f["content"]) for f in rec["cross_files"]), int(rec["seed"]))


def build_file_dependency_graph(repo: Mapping[str, SourceFile]) -> FileDependencyGraph:
    edges = set()
    for path, file in repo.items():
        lang = language_of(path)
        if lang == "unknown":
            continue
        for ref in filter_intra_repo(extract_imports(file, lang), repo, importer=path, language=lang):
            target = resolve_module(ref, repo, path, lang)
            if target is not None and target != path:
                edges.add((path, target))
    return FileDependencyGraph(tuple(sorted(repo)), frozenset(edges))


def cluster_files(graph: FileDependencyGraph) -> list[RepoCluster]:
    """Weakly connected components with at least two files, each topologically sorted."""
    g = nx.DiGraph()
    g.add_nodes_from(graph.nodes)
    g.add_edges_from(graph.edges)
    clusters = []
    for comp in nx.weakly_connected_components(g):
        if len(comp) < 2:
            continue
        edges = frozenset(e for e in graph.edges if e[0] in comp and e[1] in comp)
        clusters.append(RepoCluster(topo_sort_cluster(comp, edges), edges))
    clusters.sort(key=lambda c: c.files[0])
    return clusters


def topo_sort_cluster(files: Iterable[str], edges: Iterable[tuple[str, str]]) -> tuple[str, ...]:
    """Dependency-first order: every file comes after the files it imports.

    When only import cycles remain, the lexicographically smallest remaining
    file is emitted next and its outstanding imports are dropped.
    """
    remaining = set(files)
    out_edges = {f: set() for f in remaining}
    for a, b in edges:
        if a in remaining and b in remaining and a != b:
            out_edges[a].add(b)
    order = []
    while remaining:
        ready = sorted(f for f in remaining if not (out_edges[f] & remaining))
        nxt = ready[0] if ready else min(remaining)
        order.append(nxt)
        remaining.remove(nxt)
    return tuple(order)


def surviving_edges(order: Sequence[str], edges: Iterable[tuple[str, str]]) -> set[tuple[str, str]]:
    """Edges consistent with ``order`` (the ones not dropped to break cycles)."""
    pos = {f: i for i, f in enumerate(order)}
    return {(a, b) for a, b in edges if a in pos and b in pos and pos[b] < pos[a]}


def _line_offsets(text: str) -> list[int]:
    offs = [0]
    for i, ch in enumerate(text):
        if ch == "\n":
            offs.append(i + 1)
    return offs


def _admissible_starts(text: str, n_tokens: int) -> list[tuple[int, int]]:
    """(start line, end char) pairs for targets of roughly ``n_tokens`` tokens."""
    lines = text.splitlines()
    n = len(lines)
    margin = int(n * EDGE_MARGIN)
    lo, hi = margin, n - 1 - margin
    offs = _line_offsets(text)
    words = [(m.start(), m.end(), len(tokenize(m.group()))) for m in _WORD.finditer(text)]
    starts = []
    wi = 0
    for line in range(lo, hi + 1):
        if not lines[line].strip():
            continue
        begin = offs[line]
        while wi < len(words) and words[wi][0] < begin:
            wi += 1
        total, j = 0, wi
        while j < len(words) and total < n_tokens:
            total += words[j][2]
            j += 1
        if total < n_tokens:
            break
        if total > MAX_TARGET_TOKENS:
            j -= 1
            total -= words[j][2]
        if not MIN_TARGET_TOKENS <= total <= MAX_TARGET_TOKENS:
            continue
        end = words[j - 1][1]
        if not text[end:].strip():
            continue  # must leave a non-empty suffix
        if text.count("\n", 0, end) > hi:
            continue
        starts.append((line, end))
    return starts


def sample_target(cluster: RepoCluster, repo: Mapping[str, SourceFile], rng_seed: int,
                  repo_id: str = "") -> TrainingSample:
    """Cut a 16-96 token target from a non-first file of the cluster, away from the file edges."""
    rng = named_rng(rng_seed, "dataset")
    candidates = list(cluster.files[1:])
    if not candidates:
        raise ClusterUnusableError("cluster has no non-first file")
    rng.shuffle(candidates)
    n_tokens = int(rng.integers(MIN_TARGET_TOKENS, MAX_TARGET_TOKENS + 1))
    for path in candidates:
        text = repo[path].content
        starts = _admissible_starts(text, n_tokens)
        if not starts:
            continue
        line, end = starts[int(rng.integers(len(starts)))]
        begin = _line_offsets(text)[line]
        cross = tuple((p, repo[p].content) for p in cluster.files if p != path)
        return TrainingSample(repo_id, path, text[:begin], text[begin:end], text[end:], cross, rng_seed)
    raise ClusterUnusableError("no admissible target position in any non-first file")


def build_training_set(repos: Mapping[str, Mapping[str, SourceFile]], seed: int = 0,
                       exclude: Iterable[str] = ()) -> list[TrainingSample]:
    """One sample per usable cluster, skipping excluded (held-out) repositories."""
    skip = set(exclude)
    out = []
    for repo_id in sorted(repos):
        if repo_id in skip:
            continue
        repo = repos[repo_id]
        for i, cluster in enumerate(cluster_files(build_file_dependency_graph(repo))):
            try:
                out.append(sample_target(cluster, repo, seed + i, repo_id))
            except ClusterUnusableError:
                continue
    out.sort(key=lambda s: (s.repo_id, s.seed))
    return out


def write_training_jsonl(samples: Iterable[TrainingSample], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in samples:
            fh.write(json.dumps(s.to_record(), ensure_ascii=False) + "\n")


def read_training_jsonl(path: str | Path) -> list[TrainingSample]:
    with open(path, encoding="utf-8") as fh:
        return [TrainingSample.from_record(json.loads(ln)) for ln in fh if ln.strip()]
