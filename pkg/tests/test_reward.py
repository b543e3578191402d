from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from align_retrieve.backend import MockBackend, TokenLogprobs
from align_retrieve.corpus.snippets import Snippet, SnippetKind
from align_retrieve.errors import DegenerateInputError, InvalidInputError
from align_retrieve.query import CandidateCompletion, build_enhanced_query
from align_retrieve.retrieval import EmbedderParams, embed
from align_retrieve.reward import (
    RewardSample, conditional_ppl, evaluate_sample, perplexity, reward, reward_gradient_wrt_scores,
    select_mp, snippet_context,
)


def snip(i, text):
    return Snippet(f"s{i}", SnippetKind.BASE, "lib.py", text, (i, i))


class FixedLogprobs:
    def __init__(self, values):
        self.values = values

    def score_continuation(self, context, continuation):
        return TokenLogprobs(tuple("t" * len(self.values)), tuple(self.values))


# --- perplexity ---------------------------------------------------------------

@pytest.mark.parametrize("lps,want", [
    ([0.0, 0.0, 0.0], 1.0),
    ([math.log(1 / 8)] * 5, 8.0),
    ([-0.1, -0.3], math.exp(0.2)),
])
def test_conditional_ppl_examples(lps, want):
    q = build_enhanced_query("x = 1")
    assert conditional_ppl(FixedLogprobs(lps), q, snip(0, "a"), "t") == pytest.approx(want, rel=1e-12)
    assert math.exp(0.2) == pytest.approx(1.22140, abs=1e-5)


def test_conditional_ppl_propagates_degenerate():
    with pytest.raises(DegenerateInputError):
        conditional_ppl(MockBackend(), build_enhanced_query("x"), snip(0, "a"), "  ")


def test_snippet_context_matches_prompt_framing():
    ctx = snippet_context(snip(0, "def f():"), "f(")
    assert ctx == "# --- lib.py ---\n# def f():\n\nf("


# --- select_mp --------------------------------------------------------------------

def test_select_mp_examples():
    assert select_mp([2.0, 1.5, 1.5]) == 1
    assert select_mp([3.0]) == 0
    with pytest.raises(InvalidInputError):
        select_mp([1.0, float("nan")])
    with pytest.raises(InvalidInputError):
        select_mp([])


@given(st.lists(st.integers(1, 4).map(float), min_size=1, max_size=8))
def test_select_mp_brute_force_with_ties(ppls):
    assert select_mp(ppls) == min(range(len(ppls)), key=lambda i: (ppls[i], i))


@given(st.lists(st.floats(1, 100), min_size=1, max_size=8))
def test_select_mp_invariant_under_monotone_transform(ppls):
    assert select_mp(ppls) == select_mp([math.log(p) * 3 + 7 for p in ppls])


# --- reward and its gradient ------------------------------------------------------

def test_reward_examples():
    assert reward([3.7], 0) == 0.0
    assert reward([0.0, 0.0], 0) == pytest.approx(math.log(0.5))
    assert reward([5.0, 0.0], 0) == pytest.approx(math.log(math.exp(5) / (math.exp(5) + 1)))
    assert reward([5.0, 0.0], 0) == pytest.approx(-0.00672, abs=1e-5)


def test_gradient_examples():
    assert reward_gradient_wrt_scores([0.0, 0.0], 0) == pytest.approx([0.5, -0.5])
    assert list(reward_gradient_wrt_scores([2.0], 0)) == [0.0]


def test_reward_bad_index():
    with pytest.raises(InvalidInputError):
        reward([1.0, 2.0], 2)


def test_reward_is_stable_for_large_scores():
    r = reward([1000.0, 0.0], 1)
    assert np.isfinite(r) and r == pytest.approx(-1000.0)


scores_st = st.lists(st.floats(-5, 5), min_size=2, max_size=8)


@given(scores_st, st.data())
def test_reward_gradient_matches_finite_differences(scores, data):
    mp = data.draw(st.integers(0, len(scores) - 1))
    g = reward_gradient_wrt_scores(scores, mp)
    h = 1e-6
    for j in range(len(scores)):
        up, dn = list(scores), list(scores)
        up[j] += h
        dn[j] -= h
        fd = (reward(up, mp) - reward(dn, mp)) / (2 * h)
        assert g[j] == pytest.approx(fd, rel=1e-6, abs=1e-8)


@given(scores_st, st.data(), st.floats(0.01, 3))
def test_reward_monotone_in_scores(scores, data, bump):
    mp = data.draw(st.integers(0, len(scores) - 1))
    j = data.draw(st.integers(0, len(scores) - 1))
    base = reward(scores, mp)
    up = list(scores)
    up[j] += bump
    if j == mp:
        assert reward(up, mp) > base
    else:
        assert reward(up, mp) < base


@given(scores_st, st.data(), st.floats(-50, 50))
def test_reward_shift_invariance(scores, data, c):
    mp = data.draw(st.integers(0, len(scores) - 1))
    assert reward([s + c for s in scores], mp) == pytest.approx(reward(scores, mp), abs=1e-9)
    assert abs(reward_gradient_wrt_scores(scores, mp).sum()) < 1e-9
    assert reward(scores, mp) <= 0


# --- evaluate_sample ------------------------------------------------------------------

def test_mp_is_snippet_with_target_tokens():
    sample = RewardSample(build_enhanced_query("q = "), (snip(0, "alpha beta"), snip(1, "gamma")),
                          "alpha(beta)")
    b = evaluate_sample(MockBackend(), EmbedderParams.random(8, 64, 0), sample)
    assert b.mp_index == 0 and b.ppls[0] == 1.0


def test_identical_snippets_give_uniform_softmax():
    same = tuple(snip(i, "same text") for i in range(4))
    b = evaluate_sample(MockBackend(), EmbedderParams.random(8, 64, 0),
                        RewardSample(build_enhanced_query("x"), same, "same"))
    assert b.softmax == pytest.approx([0.25] * 4, abs=1e-12)
    assert b.reward == pytest.approx(math.log(1 / 4), abs=1e-12)


def test_breakdown_matches_stepwise_recomputation():
    params = EmbedderParams.random(16, 128, 5)
    cands = (CandidateCompletion("cache.reset()", 0), CandidateCompletion("gen.begin(ids)", 1))
    q = build_enhanced_query("gen = Generator()\nids = tok.encode(s)\n", cands)
    snippets = (snip(0, "def begin(self, ids):"), snip(1, "def reset(self):"),
                snip(2, "class Generator:"), snip(3, "x = 1"))
    target = "gen.begin(ids)"
    b = evaluate_sample(MockBackend(), params, RewardSample(q, snippets, target))

    # oracle: mock PPL from its token-overlap definition, cosine from raw numpy
    from align_retrieve.retrieval import tokenize

    t = set(tokenize(target))
    ppl = [math.exp(1 - len(t & set(tokenize(s.text))) / len(t)) for s in snippets]
    qe = embed(params, q.rendered)
    s = np.array([embed(params, c.text) @ qe for c in snippets])
    mp = int(np.argmin(ppl))
    sm = np.exp(s) / np.exp(s).sum()
    assert b.ppls == pytest.approx(ppl, rel=1e-12)
    assert b.mp_index == mp
    assert b.scores == pytest.approx(s, abs=1e-12)
    assert b.softmax == pytest.approx(sm, abs=1e-12)
    assert b.reward == pytest.approx(math.log(sm[mp]), abs=1e-12)
    grad = -sm
    grad[mp] += 1
    assert b.grad_scores == pytest.approx(grad, abs=1e-12)
    assert sum(b.softmax) == pytest.approx(1.0, abs=1e-9)


def test_evaluate_sample_skips_on_failure(caplog):
    sample = RewardSample(build_enhanced_query("x"), (snip(0, "a"),), "b")

    class Broken:
        def score_continuation(self, context, continuation):
            raise DegenerateInputError("nope")

    assert evaluate_sample(Broken(), EmbedderParams.random(4, 16, 0), sample) is None
    assert "skipping" in caplog.text


def test_reward_sample_validation():
    with pytest.raises(InvalidInputError):
        RewardSample(build_enhanced_query("x"), (), "t")
    with pytest.raises(InvalidInputError):
        RewardSample(build_enhanced_query("x"), (snip(0, "a"),), "  ")


def test_perplexity_empty():
    with pytest.raises(InvalidInputError):
        perplexity([])
