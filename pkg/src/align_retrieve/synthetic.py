"""Synthetic corpora with planted structure, for desk-scale training and benchmarks."""
from __future__ import annotations

import numpy as np

from .corpus.snippets import Snippet, SnippetKind
from .query import CandidateCompletion, build_enhanced_query
from .reward import RewardSample
from .seeding import named_rng

_SYLLABLES = ["ka", "lo", "mi", "ru", "te", "vo", "zi", "pa", "ne", "sho", "qu", "fa", "di", "gu", "be", "xo"]


def _word(rng: np.random.Generator, used: set[str], parts: int = 3) -> str:
    while True:
        w = "".join(rng.choice(_SYLLABLES, size=parts))
        if w not in used:
            used.add(w)
            return w


def planted_reward_dataset(n_samples: int = 200, n_snippets: int = 10, n_concepts: int = 40,
                           seed: int = 0) -> list[RewardSample]:
    """Reward samples whose lowest-perplexity snippet shares no token with the query.

    Each concept pairs query-side identifiers with the identifiers of the code
    that completes it. The planted snippet holds the completion identifiers;
    the distractors share decoy identifiers with the query and carry other
    concepts' completion identifiers. An untrained embedder therefore prefers
    a distractor, and only a retriever that learns the pairing ranks the
    planted snippet first.
    """
    rng = named_rng(seed, "synthetic")
    used: set[str] = set()
    concepts = [([_word(rng, used) for _ in range(2)], [_word(rng, used) for _ in range(3)])
                for _ in range(n_concepts)]
    decoys = [_word(rng, used) for _ in range(60)]
    fillers = [_word(rng, used, 2) for _ in range(80)]

    samples = []
    for s in range(n_samples):
        cid = s % n_concepts
        q_words, t_words = concepts[cid]
        shared = list(rng.choice(decoys, size=3, replace=False))
        unfinished = (
            f"def step_{s}(state):\n"
            f"    {shared[0]} = state.{shared[1]}({shared[2]})\n"
            f"    value = {q_words[0]}.{q_words[1]}(state)\n"
        )
        cand = CandidateCompletion(f"result = {q_words[0]}.{q_words[1]}({shared[0]})", 0)
        query = build_enhanced_query(unfinished, [cand])
        target = f"    return {t_words[0]}({t_words[1]}, {t_words[2]})"

        slots = rng.permutation(n_snippets)
        snippets: list[Snippet | None] = [None] * n_snippets
        fill = list(rng.choice(fillers, size=2, replace=False))
        snippets[slots[0]] = Snippet(
            f"s{s}/planted", SnippetKind.BASE, f"pkg/{t_words[0]}.py",
            f"def {t_words[0]}({t_words[1]}, {t_words[2]}):\n    return {fill[0]}({t_words[1]}) + {fill[1]}",
        )
        others = [c for c in range(n_concepts) if c != cid]
        for j, slot in enumerate(slots[1:]):
            _, ot = concepts[others[int(rng.integers(len(others)))]]
            d = list(rng.choice(shared, size=2, replace=False))
            f = rng.choice(fillers)
            snippets[slot] = Snippet(
                f"s{s}/d{j}", SnippetKind.BASE, f"pkg/{ot[0]}.py",
                f"def {ot[0]}({d[0]}, {ot[1]}):\n    return {d[1]}.{f}({ot[2]})",
            )
        samples.append(RewardSample(query, tuple(snippets), target))
    return samples


def _noise_lines(rng, words, n, indent="        "):
    out = []
    for i in range(n):
        a, b, c = rng.choice(words, size=3, replace=False)
        out.append(f"{indent}{a} = {b}({c}, {i})")
    return out


def _shared_task(rng, used, tid):
    """Groundtruth line sits in a cross-file that the plain query already finds."""
    a, b, c, d = (_word(rng, used) for _ in range(4))
    gt = f"{a}_{b} = {c}.{d}({a}, {b})"
    helper = "\n".join([
        f"def {c}_{d}({a}, {b}):",
        f"    {gt}",
        f"    return {a}_{b}",
    ]) + "\n"
    main = "\n".join([
        f"def run({a}, {b}):",
        f"    # {a} {b} via {c} {d}",
    ]) + "\n"
    return [("helper.py", helper), ("main.py", main)], main, gt


def _enhancement_task(rng, used, tid):
    """Groundtruth reachable only after sampled candidates join the query."""
    c0, c1, c2, c3 = (_word(rng, used) for _ in range(4))
    t1, t2, t3, n1, n2, n3 = (_word(rng, used) for _ in range(6))
    gt = f"result = {t1}.{t2}_{t3}({n1}, {n2})"
    decoy = "\n".join([
        f"{c0}_{c1} = {c2}({c3}, {c0})",
        f"{c1}_{c2} = {c3}({c0}, {c1})",
        f"{c2}_{c3} = {c0}({c1}, {c2})",
    ]) + "\n"
    impl = "\n".join([
        f"def {t2}_{t3}({n1}, {n2}):",
        f"    {gt}",
        f"    {n3} = {t1}({n2})",
        f"    return {t1}_{n3}({n1})",
    ]) + "\n"
    main = "\n".join([
        f"def handle({c0}, {c1}):",
        f"    {c0} = {c1}({c2})",
        f"    {c2} = {c3}({c0})",
        f"    # {t1} {t2} for the batch",
    ]) + "\n"
    return [("decoy.py", decoy), ("impl.py", impl), ("main.py", main)], main, gt


def _dependency_task(rng, used, tid):
    """Groundtruth is a method signature of an imported class, buried in a long class body."""
    cls, base_attr, m1, m2, m3, p1, p2 = (_word(rng, used) for _ in range(7))
    noise = [_word(rng, used, 2) for _ in range(12)]
    method = f"{m1}_{m2}"
    gt = f"def {method}(self, {p1}, {p2}):"
    body = [f"class {cls.capitalize()}Base:", ""]
    body += [f"    def __init__(self, {base_attr}):", f"        self.{base_attr} = {base_attr}"]
    body += _noise_lines(rng, noise, 9) + [""]
    body += [f"    {gt}"] + _noise_lines(rng, noise, 12) + [""]
    body += [f"    def close_{m3}(self, {p2}):"] + _noise_lines(rng, noise, 12)
    base = "\n".join(body) + "\n"
    decoys = []
    for i in range(6):
        lines = [f"def echo_{cls}_{i}(handler):"]
        lines += [f"    {noise[(i + j) % 12]}({cls}, handler, {base_attr})" for j in range(3)]
        decoys.append((f"log_{i}.py", "\n".join(lines) + "\n"))
    main = "\n".join([
        f"from base import {cls.capitalize()}Base",
        "",
        "",
        f"class Echo{cls.capitalize()}({cls.capitalize()}Base):",
        "",
        f"    def __init__(self, {base_attr}):",
        f"        super().__init__({base_attr})",
        "",
        f"    # {m1} {m2} {p1} {p2} handler",
    ]) + "\n"
    return [("base.py", base), *decoys, ("main.py", main)], main, "    " + gt


def ablation_benchmark(n_tasks: int = 50, seed: int = 0):
    """Fixture tasks for the ablation comparison, cycling through three families.

    ``shared`` tasks are solvable by every configuration; ``enhance`` tasks need
    sampled candidates in the retrieval query; ``depend`` tasks need the
    imported class's dependency snippet.
    """
    from .evaluation import BenchmarkTask

    rng = named_rng(seed, "benchmark")
    used: set[str] = set()
    makers = [("shared", _shared_task), ("enhance", _enhancement_task), ("depend", _dependency_task)]
    tasks = []
    for i in range(n_tasks):
        family, make = makers[i % len(makers)]
        files, unfinished, gt = make(rng, used, i)
        tasks.append(BenchmarkTask(f"{family}/{i:03d}", tuple(files), "main.py", unfinished, gt.strip()))
    return tasks
