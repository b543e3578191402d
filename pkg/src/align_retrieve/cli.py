"""Command-line entry point: index | complete | train | eval | theory | dataset-build."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Sequence

from .backend import make_backend
from .config import AppConfig, flat_keys, load_config
from .corpus import build_codebase, load_repo, base_snippets, write_corpus_jsonl
from .corpus.snippets import SourceFile
from .errors import AlignRetrieveError, InvalidConfigError, InvalidParameterError, NoInteriorOptimumError
from .evaluation import read_tasks, run_benchmark, sweep_k
from .pipeline import Backends, build_reward_sample, complete
from .retrieval import EmbedderParams
from .theory import SamplingTheoryParams, cumulative_error, optimal_n, p_at_least_one, utility
from .trainer import train
from .training_data import build_training_set, read_training_jsonl, write_training_jsonl

log = logging.getLogger("align_retrieve")

EXIT_OK, EXIT_USAGE, EXIT_RUNTIME = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


# short aliases for the most used keys; every key is also reachable as --section.name
_ALIASES = {
    "seed": "sampling.seed",
    "k": "sampling.k",
    "temperature": "sampling.temperature",
    "top-p": "sampling.top_p",
    "max-lines": "retrieval.L",
    "epochs": "train.epochs",
    "lr": "train.learning_rate",
    "backend": None,  # fans out to every role
}
_FLAG_ALIASES = {
    "no-dependency-context": "ablation.no_dependency_context",
    "no-query-enhancement": "ablation.no_query_enhancement",
    "no-trained-retriever": "ablation.no_trained_retriever",
}


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("configuration")
    g.add_argument("--config", help="TOML config file")
    for key, typ in flat_keys(AppConfig).items():
        g.add_argument(f"--{key}", dest=f"cfg:{key}", default=None, metavar=typ.__name__.upper())
    for alias, key in _ALIASES.items():
        g.add_argument(f"--{alias}", dest=f"alias:{alias}", default=None)
    for alias, key in _FLAG_ALIASES.items():
        g.add_argument(f"--{alias}", dest=f"cfg:{key}", action="store_const", const="true", default=None)
    g.add_argument("-v", "--verbose", action="store_true")


def _config_from(args: argparse.Namespace) -> AppConfig:
    overrides: dict[str, Any] = {}
    for name, value in vars(args).items():
        if value is None:
            continue
        if name.startswith("alias:"):
            alias = name[6:]
            if alias == "backend":
                for role in ("sampler", "evaluator", "generator"):
                    overrides.setdefault(f"backend.{role}.kind", value)
            else:
                overrides.setdefault(_ALIASES[alias], value)
    for name, value in vars(args).items():
        if name.startswith("cfg:") and value is not None:
            overrides[name[4:]] = value  # explicit dotted keys win over aliases
    return load_config(args.config, overrides)


def _backends(cfg: AppConfig) -> Backends:
    b = cfg.backend
    return Backends(make_backend(b.sampler), make_backend(b.generator), make_backend(b.evaluator))


def _load_params(path: str) -> EmbedderParams | None:
    return EmbedderParams.load(path) if path else None


def cmd_index(args, cfg: AppConfig) -> int:
    repo = load_repo(args.repo)
    if args.completion_file:
        snippets = build_codebase(repo, args.completion_file, cfg.retrieval.L,
                                  include_dependencies=not cfg.ablation.no_dependency_context)
    else:
        snippets = [s for path in sorted(repo) for s in base_snippets(repo[path], cfg.retrieval.L)]
    out = args.out or cfg.paths.corpus
    if not out:
        raise InvalidConfigError("no output path: pass OUT or set paths.corpus")
    write_corpus_jsonl(snippets, out)
    counts: dict[str, int] = {}
    for s in snippets:
        counts[s.kind.value] = counts.get(s.kind.value, 0) + 1
    for kind in sorted(counts):
        print(f"{kind}\t{counts[kind]}")
    print(f"total\t{len(snippets)}")
    return EXIT_OK


def cmd_complete(args, cfg: AppConfig) -> int:
    target = Path(args.file).resolve()
    root = Path(args.repo or cfg.paths.repo_root or target.parent).resolve()
    repo = load_repo(root)
    try:
        rel = target.relative_to(root).as_posix()
    except ValueError:
        rel = target.name
    code = target.read_text(encoding="utf-8")
    trace = complete(repo, rel, code, cfg.pipeline(), _backends(cfg), _load_params(cfg.paths.checkpoint))
    if args.trace:
        print(json.dumps({"query": trace.query, "candidates": [c.text for c in trace.candidates],
                          "coarse": trace.coarse_ids, "fine": trace.fine_ids}, indent=2),
              file=sys.stderr)
    print(trace.prediction)
    return EXIT_OK


def _reward_samples(records, cfg: AppConfig, pcfg, sampler) -> list:
    out = []
    for s in records:
        try:
            out.append(build_reward_sample(s.cross_files, s.completion_file, s.unfinished_code,
                                           s.target, pcfg, sampler, cfg.retrieval.reward_n))
        except AlignRetrieveError as exc:
            log.warning("skipping sample %s/%s: %s", s.repo_id, s.completion_file, exc)
    return out


def cmd_train(args, cfg: AppConfig) -> int:
    pcfg = cfg.pipeline()
    sampler = make_backend(cfg.backend.sampler)
    records = read_training_jsonl(args.dataset)
    data = _reward_samples(records, cfg, pcfg, sampler)
    if not data:
        raise AlignRetrieveError("no usable training samples")

    def refresh(epoch: int):
        # new sampler seed per epoch; the mock sampler shifts its ranking with it
        return _reward_samples(records, cfg, replace(pcfg, seed=pcfg.seed + epoch - 1), sampler)

    out = args.out or cfg.paths.out_dir
    init = _load_params(cfg.paths.checkpoint)
    result = train(cfg.train_config(), data, make_backend(cfg.backend.evaluator), out, init=init,
                   refresh=refresh)
    for m in result.metrics:
        print(f"epoch {m.epoch}\treward {m.mean_reward:.4f}\trecall@1 {m.recall_at_1:.3f}\t"
              f"grad {m.gradient_norm:.4g}")
    print(f"checkpoint\t{result.checkpoint}")
    return EXIT_OK


def _parse_ks(text: str) -> list[int]:
    if "-" in text:
        lo, hi = text.split("-", 1)
        return list(range(int(lo), int(hi) + 1))
    return [int(x) for x in text.split(",")]


def cmd_eval(args, cfg: AppConfig) -> int:
    tasks = read_tasks(args.tasks or cfg.paths.tasks)
    params = _load_params(cfg.paths.checkpoint)
    backends = _backends(cfg)
    out = Path(args.out or Path(cfg.paths.out_dir) / "report.json")
    out.parent.mkdir(parents=True, exist_ok=True)
    if args.sweep_k:
        rows = sweep_k(tasks, cfg.pipeline(), backends, params, _parse_ks(args.sweep_k))
        out.write_text(json.dumps({"config": cfg.pipeline().echo(), "sweep": rows},
                                  indent=2, sort_keys=True) + "\n", encoding="utf-8")
        print("k\tEM\tES\tEM@k")
        for r in rows:
            print(f"{r['k']}\t{_fmt(r['EM'])}\t{_fmt(r['ES'])}\t{_fmt(r['EM@k'])}")
        return EXIT_OK
    report = run_benchmark(tasks, cfg.pipeline(), backends, params, workers=args.workers)
    report.save(out)
    if args.csv:
        report.save_csv(args.csv)
    a = report.aggregates
    print(f"tasks\t{a['n']}\nEM\t{_fmt(a['EM'])}\nES\t{_fmt(a['ES'])}\nEM@k\t{_fmt(a['EM@k'])}")
    return EXIT_OK


def _fmt(x) -> str:
    return "n/a" if x is None else f"{x:.2f}"


def cmd_theory(args, cfg: AppConfig) -> int:
    params = SamplingTheoryParams(args.p_s, args.rho, args.alpha, args.beta, args.gamma)
    print("n\tP(n)\teps_n\tU(n)")
    for n in range(1, args.n_max + 1):
        print(f"{n}\t{p_at_least_one(params, n):.6f}\t{cumulative_error(params, n):.6f}\t"
              f"{utility(params, n):.6f}")
    try:
        print(f"n*\t{optimal_n(params):.6f}")
    except NoInteriorOptimumError as exc:
        print(f"n*\tn/a ({exc})")
    return EXIT_OK


def _read_manifest(path: str | None) -> list[str]:
    if not path:
        return []
    return [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines()
            if ln.strip() and not ln.lstrip().startswith("#")]


def cmd_dataset_build(args, cfg: AppConfig) -> int:
    root = Path(args.repos)
    if not root.is_dir():
        raise InvalidConfigError(f"not a directory: {root}")
    repos = {d.name: load_repo(d) for d in sorted(root.iterdir()) if d.is_dir()}
    samples = build_training_set(repos, cfg.sampling.seed, _read_manifest(args.exclude))
    write_training_jsonl(samples, args.out)
    print(f"repos\t{len(repos)}\nsamples\t{len(samples)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="align-retrieve", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("index", help="split a repository into a snippet corpus (JSONL)")
    p.add_argument("repo")
    p.add_argument("out", nargs="?")
    p.add_argument("--completion-file", help="also add dependency snippets for this file")
    p.set_defaults(func=cmd_index)

    p = sub.add_parser("complete", help="predict the next line of an unfinished file")
    p.add_argument("file")
    p.add_argument("--repo", help="repository root (default: paths.repo_root or the file's directory)")
    p.add_argument("--trace", action="store_true", help="print retrieval details to stderr")
    p.set_defaults(func=cmd_complete)

    p = sub.add_parser("train", help="fine-tune the dense retriever with the perplexity reward")
    p.add_argument("dataset", help="training JSONL from dataset-build")
    p.add_argument("--out", help="output directory (default: paths.out_dir)")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="run a benchmark task file")
    p.add_argument("tasks", nargs="?")
    p.add_argument("--out", help="report JSON path")
    p.add_argument("--csv", help="also write per-task rows as CSV")
    p.add_argument("--sweep-k", help="e.g. 1-6 or 1,2,4")
    p.add_argument("--workers", type=int, default=1)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("theory", help="tabulate the sampling-number trade-off")
    p.add_argument("--p-s", type=float, default=0.5)
    p.add_argument("--rho", type=float, default=0.0)
    p.add_argument("--alpha", type=float, default=1.0)
    p.add_argument("--beta", type=float, default=0.05)
    p.add_argument("--gamma", type=float, default=0.05)
    p.add_argument("--n-max", type=int, default=8)
    p.set_defaults(func=cmd_theory)

    p = sub.add_parser("dataset-build", help="build training samples from a directory of repositories")
    p.add_argument("repos", help="directory whose subdirectories are repositories")
    p.add_argument("out")
    p.add_argument("--exclude", help="manifest of repository names to hold out, one per line")
    p.set_defaults(func=cmd_dataset_build)

    for sp in sub.choices.values():
        _add_config_flags(sp)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _config_from(args)
    except InvalidConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args, cfg)
    except (InvalidConfigError, InvalidParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (AlignRetrieveError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
