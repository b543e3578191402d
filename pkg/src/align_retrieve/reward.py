"""Perplexity-derived reward for retriever training.

For one query and ``n`` candidate snippets, the snippet under which the
evaluator model finds the target code least perplexing is the "best" one.
The reward is the retriever's log-softmax probability of that snippet.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .backend import Backend
from .corpus.snippets import Snippet
from .errors import AlignRetrieveError, InvalidInputError
from .prompt import comment_prefix, frame_snippet, render
from .query import EnhancedQuery
from .retrieval import EmbedderParams, embed

log = logging.getLogger(__name__)

DEFAULT_REWARD_N = 10


@dataclass(frozen=True)
class RewardSample:
    query: EnhancedQuery
    snippets: tuple[Snippet, ...]
    target: str
    completion_path: str | None = None

    def __post_init__(self):
        if not self.snippets:
            raise InvalidInputError("a reward sample needs at least one snippet")
        if not self.target.strip():
            raise InvalidInputError("target must be non-empty")


@dataclass(frozen=True)
class RewardBreakdown:
    ppls: tuple[float, ...]
    mp_index: int
    scores: tuple[float, ...]
    softmax: tuple[float, ...]
    reward: float
    grad_scores: tuple[float, ...]


def perplexity(logprobs: Sequence[float]) -> float:
    if not len(logprobs):
        raise InvalidInputError("perplexity of an empty token sequence")
    return math.exp(-math.fsum(logprobs) / len(logprobs))


def snippet_context(snippet: Snippet, unfinished_code: str, completion_path: str | None = None) -> str:
    """The snippet framed above the unfinished code, as in generation prompts."""
    return render([frame_snippet(snippet.origin_path, snippet.text, comment_prefix(completion_path))],
                  unfinished_code)


def conditional_ppl(backend: Backend, query: EnhancedQuery, snippet: Snippet, target: str,
                    completion_path: str | None = None) -> float:
    """Perplexity of ``target`` given the snippet placed above the unfinished code."""
    ctx = snippet_context(snippet, query.unfinished_code, completion_path)
    return perplexity(backend.score_continuation(ctx, target).logprobs)


def select_mp(ppls: Sequence[float]) -> int:
    """Index of the smallest perplexity; the lowest index wins ties."""
    if not len(ppls):
        raise InvalidInputError("no perplexities given")
    if any(math.isnan(p) for p in ppls):
        raise InvalidInputError("perplexities contain NaN")
    best = 0
    for i, p in enumerate(ppls):
        if p < ppls[best]:
            best = i
    return best


def log_softmax(scores: Sequence[float]) -> np.ndarray:
    s = np.asarray(scores, dtype=float)
    m = s.max()
    return s - m - math.log(np.exp(s - m).sum())


def reward(scores: Sequence[float], mp_index: int) -> float:
    if not 0 <= mp_index < len(scores):
        raise InvalidInputError(f"mp_index {mp_index} out of range")
    if len(scores) == 1:
        return 0.0
    return float(log_softmax(scores)[mp_index])


def reward_gradient_wrt_scores(scores: Sequence[float], mp_index: int) -> np.ndarray:
    if not 0 <= mp_index < len(scores):
        raise InvalidInputError(f"mp_index {mp_index} out of range")
    grad = -np.exp(log_softmax(scores))
    grad[mp_index] += 1.0
    if len(scores) == 1:
        grad[:] = 0.0
    return grad


def similarity_scores(params: EmbedderParams, sample: RewardSample) -> np.ndarray:
    q = embed(params, sample.query.rendered)
    return np.array([float(embed(params, s.text) @ q) for s in sample.snippets])


def sample_ppls(backend: Backend, sample: RewardSample) -> list[float]:
    return [conditional_ppl(backend, sample.query, s, sample.target, sample.completion_path)
            for s in sample.snippets]


def breakdown_from(ppls: Sequence[float], scores: Sequence[float]) -> RewardBreakdown:
    mp = select_mp(ppls)
    sm = np.exp(log_softmax(scores))
    return RewardBreakdown(
        tuple(float(p) for p in ppls), mp, tuple(float(s) for s in scores),
        tuple(float(x) for x in sm), reward(scores, mp),
        tuple(float(g) for g in reward_gradient_wrt_scores(scores, mp)),
    )


def evaluate_sample(backend: Backend, params: EmbedderParams, sample: RewardSample) -> RewardBreakdown | None:
    """Full reward breakdown, or None (with a logged diagnostic) if scoring fails."""
    try:
        ppls = sample_ppls(backend, sample)
    except AlignRetrieveError as exc:
        log.warning("skipping reward sample: %s", exc)
        return None
    return breakdown_from(ppls, similarity_scores(params, sample))
