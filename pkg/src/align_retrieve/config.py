"""Application configuration: built-in defaults < TOML file < command-line flags."""
from __future__ import annotations

import dataclasses
import sys
import typing
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .backend import BackendConfig
from .errors import InvalidConfigError
from .pipeline import PipelineConfig
from .trainer import TrainConfig

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class PathsConfig:
    repo_root: str = ""
    corpus: str = ""
    checkpoint: str = ""
    tasks: str = ""
    out_dir: str = "runs"


@dataclass(frozen=True)
class SamplingConfig:
    k: int = 4
    temperature: float = 0.8
    top_p: float = 0.95
    seed: int = 0
    max_new_tokens: int = 64


@dataclass(frozen=True)
class RetrievalConfig:
    L: int = 15
    coarse_k: int = 5
    sampler_budget_tokens: int = 2048
    fine_budget_tokens: int = 2048
    fine_k: int = 0  # 0: fill the token budget
    reward_n: int = 10
    tail_lines: int = 10
    dim: int = 128
    buckets: int = 4096


@dataclass(frozen=True)
class AblationConfig:
    no_dependency_context: bool = False
    no_query_enhancement: bool = False
    no_trained_retriever: bool = False


@dataclass(frozen=True)
class TrainSection:
    epochs: int = 20
    samples_per_epoch: int = 200
    learning_rate: float = 5e-5
    optimizer: str = "adam"
    checkpoint_every: int = 0
    clip_norm: float = 1.0
    resample_each_epoch: bool = False


@dataclass(frozen=True)
class BackendRoles:
    sampler: BackendConfig = field(default_factory=BackendConfig)
    evaluator: BackendConfig = field(default_factory=BackendConfig)
    generator: BackendConfig = field(default_factory=BackendConfig)


@dataclass(frozen=True)
class AppConfig:
    paths: PathsConfig = field(default_factory=PathsConfig)
    backend: BackendRoles = field(default_factory=BackendRoles)
    sampling: SamplingConfig = field(default_factory=SamplingConfig)
    retrieval: RetrievalConfig = field(default_factory=RetrievalConfig)
    ablation: AblationConfig = field(default_factory=AblationConfig)
    train: TrainSection = field(default_factory=TrainSection)

    def validate(self) -> "AppConfig":
        s, r = self.sampling, self.retrieval
        checks = [
            (1 <= s.k <= 8, "sampling.k must be in 1..8"),
            (s.temperature >= 0, "sampling.temperature must be >= 0"),
            (0 < s.top_p <= 1, "sampling.top_p must be in (0, 1]"),
            (r.L >= 1, "retrieval.L must be >= 1"),
            (r.coarse_k >= 1, "retrieval.coarse_k must be >= 1"),
            (r.fine_budget_tokens > 0 and r.sampler_budget_tokens > 0, "token budgets must be positive"),
            (r.fine_k >= 0, "retrieval.fine_k must be >= 0"),
            (r.reward_n >= 1, "retrieval.reward_n must be >= 1"),
            (r.dim >= 2 and r.buckets >= r.dim, "need retrieval.dim >= 2 and buckets >= dim"),
            (self.train.epochs >= 0 and self.train.learning_rate >= 0, "train values must be non-negative"),
        ]
        for ok, msg in checks:
            if not ok:
                raise InvalidConfigError(msg)
        return self

    def pipeline(self) -> PipelineConfig:
        s, r, a = self.sampling, self.retrieval, self.ablation
        return PipelineConfig(
            max_lines=r.L, coarse_k=r.coarse_k, sampler_budget_tokens=r.sampler_budget_tokens,
            fine_budget_tokens=r.fine_budget_tokens, fine_k=r.fine_k or None, k=s.k,
            temperature=s.temperature, top_p=s.top_p, seed=s.seed, tail_lines=r.tail_lines,
            max_new_tokens=s.max_new_tokens, dim=r.dim, buckets=r.buckets,
            no_dependency_context=a.no_dependency_context,
            no_query_enhancement=a.no_query_enhancement,
            no_trained_retriever=a.no_trained_retriever,
        )

    def train_config(self) -> TrainConfig:
        t = self.train
        return TrainConfig(
            epochs=t.epochs, samples_per_epoch=t.samples_per_epoch, learning_rate=t.learning_rate,
            snippets_per_sample=self.retrieval.reward_n, k=self.sampling.k, seed=self.sampling.seed,
            optimizer=t.optimizer, clip_norm=t.clip_norm, checkpoint_every=t.checkpoint_every,
            dim=self.retrieval.dim, buckets=self.retrieval.buckets,
            resample_each_epoch=t.resample_each_epoch,
        )


def _hints(cls) -> dict[str, Any]:
    return typing.get_type_hints(cls)


def flat_keys(cls=AppConfig, prefix: str = "") -> dict[str, type]:
    """Every leaf key as ``section.name`` mapped to its scalar type."""
    out = {}
    hints = _hints(cls)
    for f in fields(cls):
        t = hints[f.name]
        if dataclasses.is_dataclass(t):
            out.update(flat_keys(t, f"{prefix}{f.name}."))
        else:
            args = [a for a in typing.get_args(t) if a is not type(None)]
            out[prefix + f.name] = args[0] if args else t
    return out


def _coerce(key: str, value: Any, typ: type) -> Any:
    try:
        if typ is bool:
            if isinstance(value, str):
                if value.lower() in ("1", "true", "yes", "on"):
                    return True
                if value.lower() in ("0", "false", "no", "off"):
                    return False
                raise ValueError(value)
            return bool(value)
        return typ(value)
    except (TypeError, ValueError) as exc:
        raise InvalidConfigError(f"bad value for {key}: {value!r}") from exc


def apply_overrides(cfg: Any, overrides: dict[str, Any], prefix: str = "") -> Any:
    """Return ``cfg`` with dotted-key overrides applied (unknown keys are errors)."""
    known = flat_keys(type(cfg))
    for key in overrides:
        if key not in known:
            raise InvalidConfigError(f"unknown config key {prefix}{key}")
    return _apply(cfg, {k: _coerce(k, v, known[k]) for k, v in overrides.items()})


def _apply(obj, flat: dict[str, Any]):
    changes = {}
    for f in fields(obj):
        sub = {k[len(f.name) + 1:]: v for k, v in flat.items() if k.startswith(f.name + ".")}
        if sub:
            changes[f.name] = _apply(getattr(obj, f.name), sub)
        elif f.name in flat:
            changes[f.name] = flat[f.name]
    try:
        return replace(obj, **changes) if changes else obj
    except InvalidConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise InvalidConfigError(str(exc)) from exc


def _flatten(doc: dict, prefix: str = "") -> dict[str, Any]:
    out = {}
    for k, v in doc.items():
        if isinstance(v, dict):
            out.update(_flatten(v, f"{prefix}{k}."))
        else:
            out[prefix + k] = v
    return out


def load_config(path: str | Path | None = None, overrides: dict[str, Any] | None = None) -> AppConfig:
    cfg = AppConfig()
    if path:
        try:
            with open(path, "rb") as fh:
                doc = tomllib.load(fh)
        except (OSError, tomllib.TOMLDecodeError) as exc:
            raise InvalidConfigError(f"cannot read config {path}: {exc}") from exc
        cfg = apply_overrides(cfg, _flatten(doc))
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    return cfg.validate()
