from __future__ import annotations

import json
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, strategies as st

from align_retrieve.backend import MockBackend
from align_retrieve.errors import InvalidInputError, InvalidParameterError
from align_retrieve.evaluation import (
    BenchmarkTask, edit_similarity, em_at_k, exact_match, levenshtein, read_tasks, run_benchmark,
    sweep_k, write_tasks,
)
from align_retrieve.pipeline import Backends, PipelineConfig, complete
from align_retrieve.corpus import repo_from_records
from align_retrieve.query import render_query
from align_retrieve.synthetic import ablation_benchmark

MOCK = Backends.single(MockBackend())
CFG = PipelineConfig(fine_k=1)


def lev_oracle(a, b):
    d = np.zeros((len(a) + 1, len(b) + 1), dtype=int)
    d[:, 0] = np.arange(len(a) + 1)
    d[0, :] = np.arange(len(b) + 1)
    for i in range(1, len(a) + 1):
        for j in range(1, len(b) + 1):
            d[i, j] = min(d[i - 1, j] + 1, d[i, j - 1] + 1, d[i - 1, j - 1] + (a[i - 1] != b[j - 1]))
    return int(d[-1, -1])


# --- metrics ----------------------------------------------------------------------

@pytest.mark.parametrize("pred,gt,want", [("x = 1", "x = 1", 1), ("x = 1 ", "x = 1", 1), ("x = 1", "x = 2", 0),
                                          ("x  = 1", "x = 1", 0)])
def test_exact_match(pred, gt, want):
    assert exact_match(pred, gt) == want


def test_edit_similarity_examples():
    assert edit_similarity("abcd", "abed") == 0.75
    assert edit_similarity("same", "same") == 1.0
    assert edit_similarity("", "abc") == 0.0
    assert edit_similarity("", "  ") == 1.0


@given(st.text("abc", max_size=12), st.text("abc", max_size=12))
def test_levenshtein_oracle_and_symmetry(a, b):
    assert levenshtein(a, b) == lev_oracle(a, b)
    assert edit_similarity(a, b) == edit_similarity(b, a)
    if exact_match(a, b):
        assert edit_similarity(a, b) == 1.0


def test_em_at_k_examples():
    assert em_at_k(["a", "b", "c"], "b", 2) == 1
    assert em_at_k(["a", "b", "c"], "b", 1) == 0
    with pytest.raises(InvalidParameterError):
        em_at_k(["a"], "a", 2)
    with pytest.raises(InvalidParameterError):
        em_at_k(["a"], "a", 0)


@given(st.lists(st.sampled_from(["a", "b", "c"]), min_size=2, max_size=6), st.sampled_from(["a", "b"]), st.data())
def test_em_at_k_monotone(preds, gt, data):
    k = data.draw(st.integers(1, len(preds) - 1))
    assert em_at_k(preds, gt, k) <= em_at_k(preds, gt, k + 1)


# --- tasks ---------------------------------------------------------------------------

def test_task_validation():
    with pytest.raises(InvalidInputError):
        BenchmarkTask("t", (("a.py", "x"),), "main.py", "", "x")
    with pytest.raises(InvalidInputError):
        BenchmarkTask("t", (("main.py", "x"),), "main.py", "", " ")


def test_tasks_round_trip(tmp_path):
    tasks = ablation_benchmark(6)
    write_tasks(tasks, tmp_path / "t.jsonl")
    assert read_tasks(tmp_path / "t.jsonl") == tasks


# --- harness -------------------------------------------------------------------------

def family(name, n=12):
    return [t for t in ablation_benchmark(n) if t.task_id.startswith(name)]


def test_full_pipeline_solves_verbatim_fixture():
    report = run_benchmark(family("enhance"), CFG, MOCK)
    assert all(r["em"] == 1 for r in report.rows)


def test_without_enhancement_misses_candidate_only_fixture():
    tasks = family("enhance")
    for t in tasks:  # the groundtruth's identifiers are not in the unfinished code
        assert t.groundtruth.split("(")[0].split()[-1] not in t.unfinished_code
    report = run_benchmark(tasks, replace(CFG, no_query_enhancement=True), MOCK)
    assert all(r["em"] == 0 for r in report.rows)


def test_without_dependency_context_misses_signature_fixture():
    report = run_benchmark(family("depend"), replace(CFG, no_dependency_context=True), MOCK)
    assert all(r["em"] == 0 for r in report.rows)
    assert all(r["em"] == 1 for r in run_benchmark(family("depend"), CFG, MOCK).rows)


def test_no_qh_query_is_zero_candidate_rendering():
    t = ablation_benchmark(3)[1]
    repo = repo_from_records([{"path": p, "content": c} for p, c in t.files])
    cfg = replace(CFG, no_query_enhancement=True)
    trace = complete(repo, t.completion_file, t.unfinished_code, cfg, MOCK)
    assert trace.query == render_query(t.unfinished_code, [], cfg.tail_lines)
    assert trace.candidates == []


def test_empty_task_list():
    report = run_benchmark([], CFG, MOCK)
    assert report.rows == []
    assert report.aggregates == {"EM": None, "ES": None, "EM@k": None, "n": 0}
    assert json.loads(report.to_json())["aggregates"]["EM"] is None


def test_aggregates_recompute_from_rows():
    report = run_benchmark(ablation_benchmark(9), replace(CFG, no_dependency_context=True), MOCK)
    rows = report.rows
    assert report.aggregates["EM"] == pytest.approx(100 * np.mean([r["em"] for r in rows]), abs=1e-9)
    assert report.aggregates["ES"] == pytest.approx(100 * np.mean([r["es"] for r in rows]), abs=1e-9)
    assert [r["task_id"] for r in rows] == sorted(r["task_id"] for r in rows)
    assert report.config["no_dependency_context"] is True


def test_failing_task_scores_zero():
    good = ablation_benchmark(1)[0]
    bad = BenchmarkTask("zz/bad", (("main.py", "x"),), "main.py", "x = (", "y")

    class Flaky(MockBackend):
        def complete(self, prompt, **kw):
            if "x = (" in prompt:
                from align_retrieve.errors import BackendError
                raise BackendError("boom", status=503)
            return super().complete(prompt, **kw)

    report = run_benchmark([good, bad], CFG, Backends.single(Flaky()))
    row = report.rows[-1]
    assert row["task_id"] == "zz/bad" and row["em"] == 0 and row["es"] == 0 and "boom" in row["error"]
    assert report.rows[0]["em"] == 1


def test_parallel_matches_serial():
    tasks = ablation_benchmark(9)
    a = run_benchmark(tasks, CFG, MOCK).to_json()
    b = run_benchmark(tasks, CFG, MOCK, workers=4).to_json()
    assert a == b


def test_sweep_k_one_row_per_k():
    rows = sweep_k(ablation_benchmark(6), CFG, MOCK, ks=range(1, 4))
    assert [r["k"] for r in rows] == [1, 2, 3]
    assert all({"EM", "ES", "EM@k", "n"} <= set(r) for r in rows)


def test_report_csv(tmp_path):
    report = run_benchmark(ablation_benchmark(3), CFG, MOCK)
    report.save_csv(tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "task_id,prediction,em,es,em_at_k" and len(lines) == 4
