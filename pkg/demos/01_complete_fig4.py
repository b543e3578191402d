"""Complete one line in a small ExLlama-style repository and show what the retriever saw.

The mock backend stands in for a language model, so the run is offline and deterministic.
"""
from __future__ import annotations

from pathlib import Path

from align_retrieve.backend import MockBackend
from align_retrieve.corpus import SnippetKind, build_codebase, load_repo
from align_retrieve.pipeline import Backends, PipelineConfig, complete

REPO = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "fig4"

repo = load_repo(REPO)
snippets = build_codebase(repo, "example_cfg.py")
print(f"codebase: {len(snippets)} snippets")
for s in snippets:
    if s.kind is SnippetKind.DEPENDENCY:
        print(f"  {s.id}")
        for line in s.text.splitlines():
            print(f"      {line}")

# cut the completion file just before the last call into the generator
source = repo["example_cfg.py"].text
cut = source.index("generator.get_accept_token")
unfinished = source[:cut]

trace = complete(repo, "example_cfg.py", unfinished, PipelineConfig(fine_k=2), Backends.single(MockBackend()))
print("\ncandidates from the sampler:")
for c in trace.candidates:
    print(f"  {c.text!r}")
print(f"coarse (BM25): {trace.coarse_ids}")
print(f"fine (dense):  {trace.fine_ids}")
print(f"prediction:    {trace.prediction!r}")
print(f"ground truth:  {source[cut:].splitlines()[0]!r}")
# the mock echoes the context line closest to the prompt, so it proposes a signature rather than
# a call; a real model behind --backend http would use the retrieved signature to write the call
