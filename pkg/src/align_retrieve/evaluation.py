"""Benchmark harness: exact match, edit similarity and EM@k over completion tasks."""
from __future__ import annotations

import csv
import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

from .corpus.codebase import repo_from_records
from .errors import AlignRetrieveError, InvalidInputError, InvalidParameterError
from .pipeline import Backends, PipelineConfig, complete
from .retrieval import EmbedderParams

log = logging.getLogger(__name__)


def exact_match(pred: str, gt: str) -> int:
    return int(pred.strip() == gt.strip())


def levenshtein(a: str, b: str) -> int:
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def edit_similarity(pred: str, gt: str) -> float:
    """``1 - lev / max_len`` on the trimmed strings, at character level."""
    a, b = pred.strip(), gt.strip()
    longest = max(len(a), len(b))
    if longest == 0:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


def em_at_k(preds: Sequence[str], gt: str, k: int) -> int:
    if not 1 <= k <= len(preds):
        raise InvalidParameterError(f"k={k} outside 1..{len(preds)}")
    return int(any(exact_match(p, gt) for p in preds[:k]))


@dataclass(frozen=True)
class BenchmarkTask:
    task_id: str
    files: tuple[tuple[str, str], ...]
    completion_file: str
    unfinished_code: str
    groundtruth: str

    def __post_init__(self):
        if self.completion_file not in {p for p, _ in self.files}:
            raise InvalidInputError(f"task {self.task_id}: completion file missing from files")
        if not self.groundtruth.strip():
            raise InvalidInputError(f"task {self.task_id}: empty groundtruth")

    def to_record(self) -> dict:
        return {
            "task_id": self.task_id,
            "files": [{"path": p, "content": c} for p, c in self.files],
            "completion_file": self.completion_file,
            "unfinished_code": self.unfinished_code,
            "groundtruth": self.groundtruth,
        }

    @classmethod
    def from_record(cls, rec: dict) -> "BenchmarkTask":
        return cls(rec["task_id"], tuple((f["path"], f["content"]) for f in rec["files"]),
                   rec["completion_file"], rec["unfinished_code"], rec["groundtruth"])


def read_tasks(path: str | Path) -> list[BenchmarkTask]:
    with open(path, encoding="utf-8") as fh:
        return [BenchmarkTask.from_record(json.loads(ln)) for ln in fh if ln.strip()]


def write_tasks(tasks: Sequence[BenchmarkTask], path: str | Path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for t in tasks:
            fh.write(json.dumps(t.to_record(), ensure_ascii=False) + "\n")


@dataclass
class EvalReport:
    rows: list[dict]
    aggregates: dict
    config: dict

    def to_json(self) -> str:
        return json.dumps({"rows": self.rows, "aggregates": self.aggregates, "config": self.config},
                          indent=2, sort_keys=True) + "\n"

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")

    def save_csv(self, path: str | Path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["task_id", "prediction", "em", "es", "em_at_k"])
            for r in self.rows:
                w.writerow([r["task_id"], r["prediction"], r["em"], r["es"], r.get("em_at_k")])


def _aggregate(rows: list[dict]) -> dict:
    if not rows:
        return {"EM": None, "ES": None, "EM@k": None, "n": 0}
    ek = [r["em_at_k"] for r in rows if r.get("em_at_k") is not None]
    return {
        "EM": 100.0 * sum(r["em"] for r in rows) / len(rows),
        "ES": 100.0 * sum(r["es"] for r in rows) / len(rows),
        "EM@k": 100.0 * sum(ek) / len(ek) if ek else None,
        "n": len(rows),
    }


def _run_one(task: BenchmarkTask, config: PipelineConfig, backends: Backends,
             params: EmbedderParams | None) -> dict:
    try:
        trace = complete(repo_from_records([{"path": p, "content": c} for p, c in task.files]),
                         task.completion_file, task.unfinished_code, config, backends, params)
    except AlignRetrieveError as exc:
        log.warning("task %s failed: %s", task.task_id, exc)
        return {"task_id": task.task_id, "prediction": "", "em": 0, "es": 0.0, "em_at_k": None,
                "error": str(exc)}
    row = {
        "task_id": task.task_id,
        "prediction": trace.prediction,
        "em": exact_match(trace.prediction, task.groundtruth),
        "es": edit_similarity(trace.prediction, task.groundtruth),
        "em_at_k": None,
    }
    if trace.candidates:
        row["em_at_k"] = em_at_k([c.text for c in trace.candidates], task.groundtruth, len(trace.candidates))
    return row


def run_benchmark(tasks: Sequence[BenchmarkTask], config: PipelineConfig, backends: Backends,
                  params: EmbedderParams | None = None, workers: int = 1) -> EvalReport:
    """Evaluate every task; a failing task scores zero instead of aborting the run."""
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            rows = list(pool.map(lambda t: _run_one(t, config, backends, params), tasks))
    else:
        rows = [_run_one(t, config, backends, params) for t in tasks]
    rows.sort(key=lambda r: r["task_id"])
    echo = config.echo()
    echo["trained_retriever"] = params is not None and not config.no_trained_retriever
    return EvalReport(rows, _aggregate(rows), echo)


def sweep_k(tasks: Sequence[BenchmarkTask], config: PipelineConfig, backends: Backends,
            params: EmbedderParams | None = None, ks: Sequence[int] = range(1, 7)) -> list[dict]:
    """One aggregate row per sampling number."""
    out = []
    for k in ks:
        agg = run_benchmark(tasks, replace(config, k=k), backends, params).aggregates
        out.append({"k": k, **agg})
    return out
