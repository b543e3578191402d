"""One completion task end to end: codebase, coarse retrieval, enhancement, fine retrieval, generation."""
from __future__ import annotations

from dataclasses import asdict, dataclass, field
from typing import Mapping

from .backend import Backend
from .corpus.codebase import repo_from_records
from .corpus.codebase import build_codebase
from .corpus.snippets import DEFAULT_MAX_LINES, SourceFile
from .query import (
    DEFAULT_K, DEFAULT_TAIL_LINES, DEFAULT_TEMPERATURE, DEFAULT_TOP_P,
    CandidateCompletion, build_enhanced_query, build_prompt, ranked_snippets, sample_candidates,
)
from .retrieval import DEFAULT_BUCKETS, DEFAULT_DIM, EmbedderParams, bm25_retrieve, build_index, dense_retrieve
from .reward import DEFAULT_REWARD_N, RewardSample
from .seeding import named_rng


@dataclass(frozen=True)
class PipelineConfig:
    max_lines: int = DEFAULT_MAX_LINES
    coarse_k: int = 5
    sampler_budget_tokens: int = 2048
    fine_budget_tokens: int = 2048
    fine_k: int | None = None
    k: int = DEFAULT_K
    temperature: float = DEFAULT_TEMPERATURE
    top_p: float = DEFAULT_TOP_P
    seed: int = 0
    tail_lines: int = DEFAULT_TAIL_LINES
    max_new_tokens: int = 64
    dim: int = DEFAULT_DIM
    buckets: int = DEFAULT_BUCKETS
    no_dependency_context: bool = False
    no_query_enhancement: bool = False
    no_trained_retriever: bool = False

    def echo(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class Backends:
    sampler: Backend
    generator: Backend
    evaluator: Backend | None = None

    @classmethod
    def single(cls, backend: Backend) -> "Backends":
        return cls(backend, backend, backend)


@dataclass
class CompletionTrace:
    prediction: str
    query: str
    candidates: list[CandidateCompletion] = field(default_factory=list)
    coarse_ids: list[str] = field(default_factory=list)
    fine_ids: list[str] = field(default_factory=list)
    prompt: str = ""


def untrained_params(config: PipelineConfig) -> EmbedderParams:
    return EmbedderParams.random(config.dim, config.buckets, named_rng(config.seed, "init"))


def first_line(text: str) -> str:
    return text.lstrip("\n").split("\n", 1)[0]


def complete(repo: Mapping[str, SourceFile], completion_file: str, unfinished_code: str,
             config: PipelineConfig, backends: Backends,
             params: EmbedderParams | None = None) -> CompletionTrace:
    if params is None or config.no_trained_retriever:
        params = untrained_params(config)
    snippets = build_codebase(
        repo, completion_file, config.max_lines,
        include_dependencies=not config.no_dependency_context,
        completion_source=SourceFile.from_text(completion_file, unfinished_code),
    )
    index = build_index(snippets, params)

    base_query = build_enhanced_query(unfinished_code, (), config.tail_lines)
    coarse = bm25_retrieve(index, base_query.rendered, config.coarse_k)
    candidates: list[CandidateCompletion] = []
    query = base_query
    if not config.no_query_enhancement:
        sampler_prompt = build_prompt(ranked_snippets(index, coarse), unfinished_code,
                                      config.sampler_budget_tokens, completion_file)
        candidates = sample_candidates(backends.sampler, sampler_prompt, config.k, config.temperature,
                                       config.top_p, config.seed, config.max_new_tokens)
        query = build_enhanced_query(unfinished_code, candidates, config.tail_lines)

    fine = dense_retrieve(index, params, query.rendered, max(len(index), 1)) if len(index) else []
    if config.fine_k is not None:
        fine = fine[: config.fine_k]
    gen_prompt = build_prompt(ranked_snippets(index, fine), unfinished_code,
                              config.fine_budget_tokens, completion_file)
    out = backends.generator.complete(gen_prompt.rendered, k=1, temperature=0.0, top_p=1.0,
                                      seed=0, max_new_tokens=config.max_new_tokens)
    return CompletionTrace(
        prediction=first_line(out[0] if out else ""),
        query=query.rendered,
        candidates=candidates,
        coarse_ids=[r.snippet_id for r in coarse],
        fine_ids=[s.id for s in gen_prompt.context_snippets],
        prompt=gen_prompt.rendered,
    )


def build_reward_sample(cross_files, completion_file: str, unfinished_code: str, target: str,
                        config: PipelineConfig, sampler: Backend,
                        reward_n: int = DEFAULT_REWARD_N) -> RewardSample:
    """Turn one training instance into the fixed candidate set the reward is computed over.

    The snippet set is the BM25 top-``reward_n`` under the enhanced query, so it stays fixed
    while the retriever changes during training.
    """
    repo = repo_from_records([{"path": p, "content": c} for p, c in cross_files])
    snippets = build_codebase(
        repo, completion_file, config.max_lines,
        include_dependencies=not config.no_dependency_context,
        completion_source=SourceFile.from_text(completion_file, unfinished_code),
    )
    index = build_index(snippets)
    query = build_enhanced_query(unfinished_code, (), config.tail_lines)
    if not config.no_query_enhancement:
        coarse = bm25_retrieve(index, query.rendered, config.coarse_k)
        prompt = build_prompt(ranked_snippets(index, coarse), unfinished_code,
                              config.sampler_budget_tokens, completion_file)
        candidates = sample_candidates(sampler, prompt, config.k, config.temperature,
                                       config.top_p, config.seed, config.max_new_tokens)
        query = build_enhanced_query(unfinished_code, candidates, config.tail_lines)
    top = bm25_retrieve(index, query.rendered, reward_n)
    chosen = [s for s, _ in ranked_snippets(index, top)]
    if not chosen:
        chosen = list(snippets[:reward_n])
    return RewardSample(query, tuple(chosen), target, completion_file)
