"""End-to-end acceptance checks, one test per criterion, run at the stated tolerances."""
from __future__ import annotations

import math
import random
import re
import time
from dataclasses import replace

import numpy as np
import pytest

from align_retrieve.backend import MockBackend
from align_retrieve.cli import main
from align_retrieve.corpus import build_codebase, load_repo
from align_retrieve.corpus.snippets import SnippetKind
from align_retrieve.evaluation import edit_similarity, em_at_k, exact_match, run_benchmark, write_tasks
from align_retrieve.pipeline import Backends, PipelineConfig
from align_retrieve.retrieval import EmbedderParams, embed
from align_retrieve.reward import reward, reward_gradient_wrt_scores, select_mp
from align_retrieve.synthetic import ablation_benchmark, planted_reward_dataset
from align_retrieve.theory import SamplingTheoryParams, optimal_n, p_at_least_one, utility
from align_retrieve.trainer import TrainConfig, reward_and_gradient, train

from conftest import FIXTURES


@pytest.fixture
def criterion(record_property):
    def mark(number, label, detail=""):
        record_property("criterion", number)
        record_property("label", label)
        record_property("detail", detail)
    return mark


# 1 ------------------------------------------------------------------------------------

def _reward_of(w, texts, query, mp):
    p = EmbedderParams(w)
    q = embed(p, query)
    return reward([float(embed(p, t) @ q) for t in texts], mp)


def _rel(a, b, floor=1e-6):
    return abs(a - b) / max(abs(a), abs(b), floor)


def test_gradient_correctness(criterion):
    criterion(1, "analytic dReward/dW vs central finite differences")
    rng = np.random.default_rng(2024)
    vocab = [f"w{i}" for i in range(48)]
    h = 1e-6
    worst, checks = 0.0, 0
    t0 = time.perf_counter()
    for _ in range(100):
        n = int(rng.integers(2, 7))
        texts = [" ".join(rng.choice(vocab, size=int(rng.integers(2, 8)))) for _ in range(n)]
        query = " ".join(rng.choice(vocab, size=6))
        mp = int(rng.integers(n))
        params = EmbedderParams.random(16, 64, rng)
        _, _, grad = reward_and_gradient(params, texts, query, mp)
        w = params.weights
        # a random full-matrix direction checks every entry at once ...
        direction = rng.normal(size=w.shape)
        fd = (_reward_of(w + h * direction, texts, query, mp) - _reward_of(w - h * direction, texts, query, mp)) / (2 * h)
        worst = max(worst, _rel(fd, float((grad * direction).sum())))
        checks += 1
        # ... and single coordinates check the entries individually
        for r, c in zip(rng.integers(0, 16, 5), rng.integers(0, 64, 5)):
            e = np.zeros_like(w)
            e[r, c] = h
            fd = (_reward_of(w + e, texts, query, mp) - _reward_of(w - e, texts, query, mp)) / (2 * h)
            worst = max(worst, _rel(fd, grad[r, c]))
            checks += 1
    elapsed = time.perf_counter() - t0
    criterion(1, "analytic dReward/dW vs central finite differences",
              f"max rel err {worst:.2e} over {checks} checks, {elapsed:.2f}s")
    assert worst < 1e-4
    assert elapsed < 10


# 2 ------------------------------------------------------------------------------------

def test_reward_algebra(criterion):
    rng = np.random.default_rng(7)
    worst_shift, worst_sum = 0.0, 0.0
    for _ in range(1000):
        n = int(rng.integers(1, 12))
        s = rng.normal(scale=3, size=n)
        mp = int(rng.integers(n))
        c = float(rng.uniform(-100, 100))
        worst_shift = max(worst_shift, abs(reward(s + c, mp) - reward(s, mp)))
        worst_sum = max(worst_sum, abs(float(reward_gradient_wrt_scores(s, mp).sum())))
        if n == 1:
            assert reward(s, 0) == 0.0
    criterion(2, "reward shift invariance, n=1 reward, gradient sums to zero",
              f"shift err {worst_shift:.1e}, grad-sum err {worst_sum:.1e}")
    assert worst_shift <= 1e-9
    assert worst_sum <= 1e-9
    assert reward([42.0], 0) == 0.0


# 3 ------------------------------------------------------------------------------------

def test_minimal_perplexity_oracle(criterion):
    rng = random.Random(3)
    ties = 0
    for _ in range(1000):
        n = rng.randint(1, 10)
        ppls = [float(rng.randint(1, 5)) if rng.random() < 0.6 else rng.uniform(1, 5) for _ in range(n)]
        brute = min(range(n), key=lambda i: (ppls[i], i))
        ties += ppls.count(min(ppls)) > 1
        assert select_mp(ppls) == brute
    criterion(3, "select_mp equals brute-force argmin", f"1000 vectors, {ties} with tied minima")
    assert ties > 50


# 4 ------------------------------------------------------------------------------------

def _fifty_file_repo(root):
    rng = random.Random(50)
    words = ["alpha", "beta", "gamma", "delta", "omega", "token", "cache", "model"]
    for f in range(50):
        lines = []
        for _ in range(rng.randint(0, 14)):
            size = rng.choice([1, 2, 3, 5, 8, 13, 21, 34])  # some blocks exceed the limit
            lines += [f"{'    ' * rng.randint(0, 2)}{rng.choice(words)}_{i} = {rng.choice(words)}({i})"
                      for i in range(size)]
            lines += rng.choice([[""], ["", ""], ["   "], ["\t", ""]])
        path = root / f"pkg{f % 5}" / f"mod_{f:02d}.py"
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    (root / "main.py").write_text("import os\n", encoding="utf-8")


def test_corpus_reconstruction(tmp_path, criterion):
    _fifty_file_repo(tmp_path)
    repo = load_repo(tmp_path)
    limit = 15
    snippets = build_codebase(repo, "main.py", limit)
    by_file: dict[str, list[str]] = {}
    for s in snippets:
        assert s.kind is SnippetKind.BASE
        assert s.line_count <= limit
        by_file.setdefault(s.origin_path, []).extend(s.lines)
    cross = [p for p in repo if p != "main.py"]
    assert len(cross) == 50
    for path in cross:
        want = [ln for ln in repo[path].lines if ln.strip()]
        assert by_file.get(path, []) == want, path
    criterion(4, "Base snippets rebuild every file's non-blank lines, each <= L lines",
              f"50 files, {len(snippets)} snippets, max {max(s.line_count for s in snippets)} lines")


# 5 ------------------------------------------------------------------------------------

FIG4_SIGNATURES = {
    "dep:generator.py::ExLlamaGenerator": [
        "class ExLlamaGenerator:",
        "def __init__(self, model, tokenizer, cache):",
        "def reset(self):",
        "def gen_begin(self, in_tokens, mask = None):",
        "def gen_accept_token(self, token):",
        "def get_accept_token(self, sequence):",
        "def gen_simple(self, prompt, max_new_tokens = 128):",
        "class Settings:",
        "def copy(self):",
    ],
    "dep:model.py::ExLlamaCache": ["class ExLlamaCache:", "def __init__(self, model, batch_size = 1):"],
    "dep:tokenizer.py::ExLlamaTokenizer": [
        "class ExLlamaTokenizer:", "def __init__(self, path):", "def encode(self, text):", "def decode(self, ids):",
    ],
}


def _norm(text):
    return re.sub(r"\s+", " ", text).strip()


def test_dependency_extraction(criterion):
    repo = load_repo(FIXTURES / "fig4")
    deps = [s for s in build_codebase(repo, "example_cfg.py") if s.kind is SnippetKind.DEPENDENCY]
    assert sorted(s.id for s in deps) == sorted(FIG4_SIGNATURES)
    for s in deps:
        got = [_norm(ln) for ln in re.split(r"\n(?=\s*(?:def|class) )", s.text)]
        assert got == FIG4_SIGNATURES[s.id], s.id
    criterion(5, "one Dependency snippet per imported class with class and method signatures",
              f"{len(deps)} class snippets, {sum(map(len, FIG4_SIGNATURES.values()))} signatures matched")


# 6 ------------------------------------------------------------------------------------

def test_sampling_theory(criterion):
    params = SamplingTheoryParams(0.5, 0.0, 1.0, 0.05, 0.05)
    assert p_at_least_one(SamplingTheoryParams(0.5, 0.0), 2) == 0.75
    n_star = optimal_n(params)
    grid = range(1, 65)
    best = max(grid, key=lambda n: utility(params, n))
    criterion(6, "P(>=1 correct) and the optimal sampling number",
              f"n* = {n_star:.4f}, brute-force argmax U(n) = {best}")
    assert abs(n_star - 3.208) <= 0.01
    assert abs(n_star - best) <= 1


# 7 ------------------------------------------------------------------------------------

def _lev_oracle(a, b):
    d = np.zeros((len(a) + 1, len(b) + 1), dtype=np.int64)
    d[:, 0] = np.arange(len(a) + 1)
    d[0, :] = np.arange(len(b) + 1)
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            d[i, j] = min(d[i - 1, j] + 1, d[i, j - 1] + 1, d[i - 1, j - 1] + (a[i - 1] != b[j - 1]))
    return int(d[-1, -1])


def test_metric_oracles(criterion):
    rng = random.Random(11)
    alphabet = "ab cd(x)=_"
    worst = 0.0
    for _ in range(1000):
        a = "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 20)))
        b = a if rng.random() < 0.1 else "".join(rng.choice(alphabet) for _ in range(rng.randint(0, 20)))
        sa, sb = a.strip(), b.strip()
        longest = max(len(sa), len(sb))
        want = 1.0 if longest == 0 else 1.0 - _lev_oracle(sa, sb) / longest
        worst = max(worst, abs(edit_similarity(a, b) - want))
        if exact_match(a, b):
            assert edit_similarity(a, b) == 1.0
    for _ in range(1000):
        preds = [rng.choice("abc") for _ in range(rng.randint(1, 6))]
        gt = rng.choice("abcd")
        seq = [em_at_k(preds, gt, k) for k in range(1, len(preds) + 1)]
        assert seq == sorted(seq)
    criterion(7, "edit similarity vs DP oracle, EM implies ES, EM@k monotone", f"max ES err {worst:.1e}")
    assert worst <= 1e-12


# 8 ------------------------------------------------------------------------------------

def test_rl_training_lifts_recall(criterion):
    t0 = time.perf_counter()
    dataset = planted_reward_dataset(200, seed=0)
    cfg = TrainConfig(epochs=5, samples_per_epoch=200, learning_rate=5e-5, seed=0)
    result = train(cfg, dataset, MockBackend())
    elapsed = time.perf_counter() - t0
    before, after = result.metrics[0].recall_at_1, result.metrics[-1].recall_at_1
    curve = " ".join(f"{m.recall_at_1:.2f}" for m in result.metrics)
    criterion(8, "RL training raises recall@1 of the minimal-PPL snippet",
              f"recall@1 by epoch: {curve} (+{after - before:.2f}), {elapsed:.1f}s")
    assert after - before >= 0.20
    assert elapsed < 120


# 9 ------------------------------------------------------------------------------------

def test_ablation_direction(criterion):
    tasks = ablation_benchmark(50, seed=0)
    backends = Backends.single(MockBackend())
    base = PipelineConfig(fine_k=1)
    runs = {
        "full": run_benchmark(tasks, base, backends),
        "w/o QH": run_benchmark(tasks, replace(base, no_query_enhancement=True), backends),
        "w/o DC": run_benchmark(tasks, replace(base, no_dependency_context=True), backends),
    }
    em = {k: r.aggregates["EM"] for k, r in runs.items()}

    def family_em(name, fam):
        rows = [r for r in runs[name].rows if r["task_id"].startswith(fam)]
        return sum(r["em"] for r in rows)

    criterion(9, "full pipeline EM >= each ablation",
              ", ".join(f"{k} EM {v:.0f}" for k, v in em.items()))
    assert em["full"] >= em["w/o QH"]
    assert em["full"] >= em["w/o DC"]
    # strict gains on the tasks built to need each component
    assert family_em("full", "enhance/") > family_em("w/o QH", "enhance/")
    assert family_em("full", "depend/") > family_em("w/o DC", "depend/")


# 10 -----------------------------------------------------------------------------------

def test_end_to_end_determinism(tmp_path, criterion, capsys):
    write_tasks(ablation_benchmark(12, seed=3), tmp_path / "tasks.jsonl")
    reports = []
    for i in range(2):
        out = tmp_path / f"report{i}.json"
        assert main(["eval", str(tmp_path / "tasks.jsonl"), "--out", str(out), "--seed", "3"]) == 0
        reports.append(out.read_bytes())
    capsys.readouterr()
    params = EmbedderParams.random(32, 256, 5)
    params.save(tmp_path / "a.json")
    EmbedderParams.load(tmp_path / "a.json").save(tmp_path / "b.json")
    same_ckpt = (tmp_path / "a.json").read_bytes() == (tmp_path / "b.json").read_bytes()
    criterion(10, "eval report and checkpoint round trip are byte-identical",
              f"report {len(reports[0])} bytes, identical={reports[0] == reports[1]}, checkpoint identical={same_ckpt}")
    assert reports[0] == reports[1]
    assert same_ckpt
