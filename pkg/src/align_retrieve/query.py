"""Query enhancement: sampling prompt, candidate completions, enhanced retrieval query."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .backend import Backend
from .corpus.snippets import Snippet
from .errors import BackendError, InvalidConfigError, InvalidParameterError
from .prompt import comment_prefix, frame_snippet, render
from .retrieval import RankedResult, RetrievalIndex, estimate_tokens

DEFAULT_K = 4
DEFAULT_TEMPERATURE = 0.8
DEFAULT_TOP_P = 0.95
DEFAULT_TAIL_LINES = 10
MIN_CODE_LINES = 50


@dataclass(frozen=True)
class CompletionPrompt:
    context_snippets: tuple[Snippet, ...]
    unfinished_code: str
    rendered: str
    token_budget: int


@dataclass(frozen=True)
class CandidateCompletion:
    text: str
    sample_index: int
    backend_meta: dict = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class EnhancedQuery:
    unfinished_code: str
    candidates: tuple[CandidateCompletion, ...] = ()
    tail_lines: int = DEFAULT_TAIL_LINES

    @property
    def rendered(self) -> str:
        return render_query(self.unfinished_code, [c.text for c in self.candidates], self.tail_lines)


def code_tail(code: str, n_lines: int) -> str:
    return "\n".join(code.rstrip("\n").split("\n")[-n_lines:])


def render_query(unfinished_code: str, candidate_texts: Sequence[str],
                 tail_lines: int = DEFAULT_TAIL_LINES) -> str:
    tail = code_tail(unfinished_code, tail_lines)
    if not candidate_texts:
        return tail
    return tail + "\n\n" + "\n".join(candidate_texts)


def build_enhanced_query(unfinished_code: str, candidates: Sequence[CandidateCompletion] = (),
                         tail_lines: int = DEFAULT_TAIL_LINES) -> EnhancedQuery:
    """Unfinished-code tail followed by the candidates in the order given.

    With no candidates this is the plain unfinished-code query used when
    query enhancement is switched off.
    """
    return EnhancedQuery(unfinished_code, tuple(candidates), tail_lines)


def ranked_snippets(index: RetrievalIndex, results: Sequence[RankedResult]) -> list[tuple[Snippet, float]]:
    return [(index.get(r.snippet_id), r.score) for r in results]


def _fit_code(code: str, budget: int) -> str:
    lines = code.split("\n")
    if estimate_tokens(code) <= budget:
        return code
    floor = min(MIN_CODE_LINES, len(lines))
    # drop leading lines while keeping at least the final `floor` lines
    cost = [estimate_tokens(ln) for ln in lines]
    total = sum(cost)
    start = 0
    while total > budget and len(lines) - start > floor:
        total -= cost[start]
        start += 1
    if total > budget:
        raise InvalidConfigError(
            f"token budget {budget} cannot hold the last {floor} lines of unfinished code")
    return "\n".join(lines[start:])


def build_prompt(ranked: Sequence[tuple[Snippet, float]], unfinished_code: str, token_budget: int,
                 completion_path: str | None = None) -> CompletionPrompt:
    """Frame retrieved snippets as comments above the unfinished code.

    Snippets are taken by descending score until the next one would exceed
    the token budget.
    """
    code = _fit_code(unfinished_code, token_budget)
    prefix = comment_prefix(completion_path)
    used = estimate_tokens(code)
    chosen, framed = [], []
    for snip, _ in sorted(ranked, key=lambda p: (-p[1], p[0].id)):
        block = frame_snippet(snip.origin_path, snip.text, prefix)
        cost = estimate_tokens(block)
        if used + cost > token_budget:
            break
        used += cost
        chosen.append(snip)
        framed.append(block)
    return CompletionPrompt(tuple(chosen), code, render(framed, code), token_budget)


def truncate_candidate(text: str) -> str:
    """Cut a sampled completion at its first blank line after some content."""
    out = []
    for ln in text.split("\n"):
        if not ln.strip():
            if any(o.strip() for o in out):
                break
            continue
        out.append(ln)
    return "\n".join(out)


def sample_candidates(backend: Backend, prompt: CompletionPrompt | str, k: int = DEFAULT_K,
                      temperature: float = DEFAULT_TEMPERATURE, top_p: float = DEFAULT_TOP_P,
                      seed: int = 0, max_new_tokens: int = 64) -> list[CandidateCompletion]:
    if k < 1:
        raise InvalidParameterError(f"k must be >= 1, got {k}")
    text = prompt.rendered if isinstance(prompt, CompletionPrompt) else prompt
    try:
        texts = backend.complete(text, k=k, temperature=temperature, top_p=top_p, seed=seed,
                                 max_new_tokens=max_new_tokens)
    except BackendError as exc:
        raise BackendError(f"sampling failed: {exc}", status=exc.status, partial=0) from exc
    if len(texts) < k:
        raise BackendError(f"backend returned {len(texts)} of {k} samples", partial=len(texts))
    return [CandidateCompletion(truncate_candidate(t), i) for i, t in enumerate(texts[:k])]
