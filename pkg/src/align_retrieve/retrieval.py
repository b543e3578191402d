"""Sparse (BM25) and dense (hashed-feature projection) retrieval over snippets."""
from __future__ import annotations

import hashlib
import json
import math
import re
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .corpus.snippets import Snippet
from .errors import InvalidConfigError, InvalidParameterError, StaleIndexError

BM25_K1 = 1.2
BM25_B = 0.75
DEFAULT_DIM = 128
DEFAULT_BUCKETS = 4096
HASH_VERSION = "blake2b64-v1"
DEGENERATE_NORM = 1e-12

_WORD = re.compile(r"[A-Za-z0-9]+")
_PART = re.compile(r"[A-Z]+(?=[A-Z][a-z])|[A-Z]?[a-z0-9]+|[A-Z]+[0-9]*")
_ROUGH_TOKEN = re.compile(r"\w+|[^\w\s]")


def tokenize(text: str) -> list[str]:
    """Lowercased identifier parts: splits on punctuation, snake_case and camelCase.

    >>> tokenize("getAcceptToken")
    ['get', 'accept', 'token']
    """
    return [p.lower() for w in _WORD.findall(text) for p in _PART.findall(w)]


def estimate_tokens(text: str) -> int:
    """Rough LLM token count (words and punctuation marks) used for prompt budgets."""
    return len(_ROUGH_TOKEN.findall(text))


@dataclass(frozen=True)
class RankedResult:
    snippet_id: str
    score: float
    rank: int


def _rank(ids: Sequence[str], scores: np.ndarray, k: int, drop_zero: bool) -> list[RankedResult]:
    if k < 1:
        raise InvalidParameterError(f"k must be >= 1, got {k}")
    order = sorted(range(len(ids)), key=lambda i: (-scores[i], ids[i]))
    if drop_zero:
        order = [i for i in order if scores[i] > 0]
    return [RankedResult(ids[i], float(scores[i]), r + 1) for r, i in enumerate(order[:k])]


# -- BM25 -----------------------------------------------------------------

@dataclass(frozen=True)
class BM25Stats:
    doc_freq: dict[str, int]
    term_freqs: tuple[Counter, ...]
    doc_lens: np.ndarray
    avg_len: float

    @classmethod
    def build(cls, texts: Sequence[str]) -> "BM25Stats":
        tfs = tuple(Counter(tokenize(t)) for t in texts)
        df: Counter = Counter()
        for tf in tfs:
            df.update(tf.keys())
        lens = np.array([sum(tf.values()) for tf in tfs], dtype=float)
        avg = float(lens.mean()) if len(lens) else 0.0
        return cls(dict(df), tfs, lens, avg)

    def idf(self, term: str) -> float:
        n = len(self.term_freqs)
        df = self.doc_freq.get(term, 0)
        return math.log((n - df + 0.5) / (df + 0.5) + 1.0)

    def scores(self, query_tokens: Sequence[str], k1: float = BM25_K1, b: float = BM25_B) -> np.ndarray:
        out = np.zeros(len(self.term_freqs))
        if not len(out) or self.avg_len == 0:
            return out
        norm = k1 * (1 - b + b * self.doc_lens / self.avg_len)
        for term in query_tokens:
            if term not in self.doc_freq:
                continue
            idf = self.idf(term)
            for i, tf in enumerate(self.term_freqs):
                f = tf.get(term, 0)
                if f:
                    out[i] += idf * f * (k1 + 1) / (f + norm[i])
        return out


# -- hashed features and the trainable projection --------------------------

def _bucket(token: str, buckets: int) -> int:
    digest = hashlib.blake2b(token.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little") % buckets


def sparse_features(tokens: Sequence[str], buckets: int) -> tuple[np.ndarray, np.ndarray]:
    """Hashed term counts as (sorted bucket indices, L2-normalized values)."""
    if buckets < 2:
        raise InvalidParameterError(f"buckets must be >= 2, got {buckets}")
    counts = Counter(_bucket(t, buckets) for t in tokens)
    if not counts:
        return np.zeros(0, dtype=np.int64), np.zeros(0)
    idx = np.array(sorted(counts), dtype=np.int64)
    vals = np.array([counts[i] for i in idx], dtype=float)
    return idx, vals / np.linalg.norm(vals)


def hash_features(tokens: Sequence[str], buckets: int) -> np.ndarray:
    """Dense L2-normalized hashed term-count vector; all zeros for empty input."""
    idx, vals = sparse_features(tokens, buckets)
    out = np.zeros(buckets)
    out[idx] = vals
    return out


@dataclass(frozen=True, eq=False)
class EmbedderParams:
    weights: np.ndarray  # (dim, buckets)

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        if w.ndim != 2:
            raise InvalidConfigError("weights must be a 2-D matrix")
        d, v = w.shape
        if d < 2 or v < d:
            raise InvalidConfigError(f"need dim >= 2 and buckets >= dim, got {d}x{v}")
        if not np.all(np.isfinite(w)):
            raise InvalidConfigError("weights contain non-finite entries")
        object.__setattr__(self, "weights", w)

    @property
    def dim(self) -> int:
        return self.weights.shape[0]

    @property
    def buckets(self) -> int:
        return self.weights.shape[1]

    @classmethod
    def random(cls, dim: int = DEFAULT_DIM, buckets: int = DEFAULT_BUCKETS,
               rng: np.random.Generator | int | None = 0) -> "EmbedderParams":
        """Glorot-uniform initialization."""
        rng = np.random.default_rng(rng)
        a = math.sqrt(6.0 / (dim + buckets))
        return cls(rng.uniform(-a, a, size=(dim, buckets)))

    @property
    def version(self) -> str:
        h = hashlib.sha256(f"{self.dim}x{self.buckets}:{HASH_VERSION}:".encode())
        h.update(self.weights.astype("<f8").tobytes())
        return h.hexdigest()[:16]

    def to_json(self) -> str:
        return json.dumps({
            "dim": self.dim,
            "buckets": self.buckets,
            "hash_version": HASH_VERSION,
            "weights": self.weights.ravel().tolist(),
        })

    @classmethod
    def from_json(cls, text: str) -> "EmbedderParams":
        obj = json.loads(text)
        if obj.get("hash_version") != HASH_VERSION:
            raise InvalidConfigError(f"unsupported hash_version {obj.get('hash_version')!r}")
        dim, buckets, flat = int(obj["dim"]), int(obj["buckets"]), obj["weights"]
        if len(flat) != dim * buckets:
            raise InvalidConfigError(f"weights has {len(flat)} entries, expected {dim * buckets}")
        return cls(np.array(flat, dtype=float).reshape(dim, buckets))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    @classmethod
    def load(cls, path: str | Path) -> "EmbedderParams":
        return cls.from_json(Path(path).read_text(encoding="utf-8"))


def project(params: EmbedderParams, text: str) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Unnormalized projection ``W h`` plus the sparse features ``h`` it came from."""
    idx, vals = sparse_features(tokenize(text), params.buckets)
    return params.weights[:, idx] @ vals, idx, vals


def embed(params: EmbedderParams, text: str) -> np.ndarray:
    """Unit-norm embedding; the zero vector marks a degenerate input."""
    u, _, _ = project(params, text)
    n = np.linalg.norm(u)
    if n < DEGENERATE_NORM:
        return np.zeros(params.dim)
    return u / n


def embed_many(params: EmbedderParams, texts: Sequence[str]) -> np.ndarray:
    return np.array([embed(params, t) for t in texts]).reshape(len(texts), params.dim)


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na < DEGENERATE_NORM or nb < DEGENERATE_NORM:
        return 0.0
    return float(np.dot(a, b) / (na * nb))


def semantic_gap(params: EmbedderParams, text_a: str, text_b: str) -> float:
    """Embedding-space distance ``1 - cos`` between two code fragments."""
    return 1.0 - cosine(embed(params, text_a), embed(params, text_b))


# -- index ----------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class RetrievalIndex:
    snippets: tuple[Snippet, ...]
    bm25: BM25Stats
    embeddings: np.ndarray | None = None
    embedder_version: str | None = None
    _by_id: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self._by_id.update({s.id: s for s in self.snippets})
        if len(self._by_id) != len(self.snippets):
            raise InvalidParameterError("snippet ids must be unique")
        if self.embeddings is not None:
            self.embeddings.setflags(write=False)

    @property
    def ids(self) -> list[str]:
        return [s.id for s in self.snippets]

    def get(self, snippet_id: str) -> Snippet:
        return self._by_id[snippet_id]

    def __len__(self) -> int:
        return len(self.snippets)

    def with_embeddings(self, params: EmbedderParams) -> "RetrievalIndex":
        emb = embed_many(params, [s.text for s in self.snippets])
        return RetrievalIndex(self.snippets, self.bm25, emb, params.version)


def build_index(snippets: Sequence[Snippet], params: EmbedderParams | None = None) -> RetrievalIndex:
    idx = RetrievalIndex(tuple(snippets), BM25Stats.build([s.text for s in snippets]))
    return idx.with_embeddings(params) if params is not None else idx


def bm25_retrieve(index: RetrievalIndex, query_text: str, k: int = 5) -> list[RankedResult]:
    """Top-k Okapi BM25 matches; snippets scoring zero are dropped."""
    if k < 1:
        raise InvalidParameterError(f"k must be >= 1, got {k}")
    tokens = tokenize(query_text)
    if not tokens:
        return []
    return _rank(index.ids, index.bm25.scores(tokens), k, drop_zero=True)


def dense_retrieve(index: RetrievalIndex, params: EmbedderParams, query_text: str,
                   k: int = 5) -> list[RankedResult]:
    """Top-k snippets by cosine similarity to the embedded query."""
    if index.embeddings is None or index.embedder_version != params.version:
        raise StaleIndexError("index embeddings do not match the embedder parameters")
    q = embed(params, query_text)
    scores = index.embeddings @ q if len(index) else np.zeros(0)
    return _rank(index.ids, scores, k, drop_zero=False)
