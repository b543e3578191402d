"""Gradient-ascent training of the dense retriever on the perplexity reward."""
from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .backend import Backend
from .errors import AlignRetrieveError, InvalidConfigError
from .retrieval import DEFAULT_BUCKETS, DEFAULT_DIM, DEGENERATE_NORM, EmbedderParams, project
from .reward import RewardSample, reward, reward_gradient_wrt_scores, sample_ppls, select_mp
from .seeding import named_rng

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 20
    samples_per_epoch: int = 200
    learning_rate: float = 5e-5
    snippets_per_sample: int = 10
    k: int = 4
    seed: int = 0
    optimizer: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    clip_norm: float = 1.0
    checkpoint_every: int = 0
    dim: int = DEFAULT_DIM
    buckets: int = DEFAULT_BUCKETS
    resample_each_epoch: bool = False

    def __post_init__(self):
        if self.epochs < 0 or self.samples_per_epoch < 1 or self.learning_rate < 0:
            raise InvalidConfigError("epochs, samples_per_epoch and learning_rate must be non-negative")
        if self.optimizer not in ("adam", "sgd"):
            raise InvalidConfigError(f"unknown optimizer {self.optimizer!r}")


@dataclass(frozen=True)
class TrainMetrics:
    epoch: int
    mean_reward: float
    recall_at_1: float
    gradient_norm: float


# -- gradients ------------------------------------------------------------

@dataclass
class _Proj:
    e: np.ndarray      # unit embedding (zeros when degenerate)
    norm: float
    idx: np.ndarray
    vals: np.ndarray


def _project(params: EmbedderParams, text: str) -> _Proj:
    u, idx, vals = project(params, text)
    n = float(np.linalg.norm(u))
    e = u / n if n >= DEGENERATE_NORM else np.zeros_like(u)
    return _Proj(e, n, idx, vals)


def _accumulate(grad: np.ndarray, p: _Proj, d_e: np.ndarray) -> None:
    """Push ``dR/de`` back through ``e = W h / |W h|`` into ``grad``."""
    if p.norm < DEGENERATE_NORM or not len(p.idx):
        return
    d_u = (d_e - p.e * (p.e @ d_e)) / p.norm
    grad[:, p.idx] += np.outer(d_u, p.vals)


def score_gradient_wrt_params(params: EmbedderParams, sample_texts: Sequence[str],
                              query_text: str) -> list[np.ndarray]:
    """``d s_i / d W`` for every snippet score ``s_i = cos(emb(c_i), emb(q))``."""
    q = _project(params, query_text)
    out = []
    for text in sample_texts:
        c = _project(params, text)
        g = np.zeros_like(params.weights)
        _accumulate(g, c, q.e)
        _accumulate(g, q, c.e)
        out.append(g)
    return out


def reward_and_gradient(params: EmbedderParams, sample_texts: Sequence[str], query_text: str,
                        mp_index: int) -> tuple[float, np.ndarray, np.ndarray]:
    """Reward, snippet scores and ``d Reward / d W`` with the best snippet held fixed."""
    q = _project(params, query_text)
    cs = [_project(params, t) for t in sample_texts]
    scores = np.array([float(c.e @ q.e) for c in cs])
    g_s = reward_gradient_wrt_scores(scores, mp_index)
    grad = np.zeros_like(params.weights)
    d_q = np.zeros(params.dim)
    for gi, c in zip(g_s, cs):
        if gi == 0.0:
            continue
        _accumulate(grad, c, gi * q.e)
        d_q += gi * c.e
    _accumulate(grad, q, d_q)
    return reward(scores, mp_index), scores, grad


# -- optimizer ------------------------------------------------------------

@dataclass
class OptimizerState:
    kind: str = "adam"
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: np.ndarray | None = None
    v: np.ndarray | None = None

    @classmethod
    def for_config(cls, cfg: TrainConfig) -> "OptimizerState":
        return cls(cfg.optimizer, cfg.beta1, cfg.beta2, cfg.eps)

    def ascend(self, w: np.ndarray, grad: np.ndarray, lr: float) -> np.ndarray:
        if self.kind == "sgd":
            return w + lr * grad
        if self.m is None:
            self.m = np.zeros_like(w)
            self.v = np.zeros_like(w)
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1 ** self.t)
        v_hat = self.v / (1 - self.beta2 ** self.t)
        return w + lr * m_hat / (np.sqrt(v_hat) + self.eps)


def clip(grad: np.ndarray, max_norm: float) -> tuple[np.ndarray, float]:
    norm = float(np.linalg.norm(grad))
    if max_norm > 0 and norm > max_norm:
        grad = grad * (max_norm / norm)
    return grad, norm


def _apply(params, grad, state, lr, clip_norm):
    grad, norm = clip(grad, clip_norm)
    if lr == 0 or not grad.any():
        return params, norm
    return EmbedderParams(state.ascend(params.weights, grad, lr)), norm


def train_step(params: EmbedderParams, sample: RewardSample, backend: Backend,
               state: OptimizerState, learning_rate: float = 5e-5,
               clip_norm: float = 1.0) -> tuple[EmbedderParams, TrainMetrics]:
    """One ascent step on the reward of ``sample``; failed scoring leaves params untouched."""
    try:
        mp = select_mp(sample_ppls(backend, sample))
    except AlignRetrieveError as exc:
        log.warning("skipping sample: %s", exc)
        return params, TrainMetrics(0, float("nan"), float("nan"), 0.0)
    r, scores, grad = reward_and_gradient(params, [s.text for s in sample.snippets],
                                          sample.query.rendered, mp)
    new, norm = _apply(params, grad, state, learning_rate, clip_norm)
    return new, TrainMetrics(0, r, float(int(np.argmax(scores)) == mp), norm)


# -- loop -----------------------------------------------------------------

@dataclass
class TrainResult:
    params: EmbedderParams
    metrics: list[TrainMetrics]
    checkpoint: Path | None = None
    metrics_path: Path | None = None
    checkpoints: list[Path] = field(default_factory=list)


@dataclass(frozen=True)
class _Prepared:
    texts: tuple[str, ...]
    query: str
    mp: int


def prepare(dataset: Sequence[RewardSample], backend: Backend) -> list[_Prepared]:
    """Score every sample once; the best snippet does not depend on the retriever weights."""
    out = []
    for s in dataset:
        try:
            mp = select_mp(sample_ppls(backend, s))
        except AlignRetrieveError as exc:
            log.warning("dropping sample: %s", exc)
            continue
        out.append(_Prepared(tuple(c.text for c in s.snippets), s.query.rendered, mp))
    return out


def evaluate(params: EmbedderParams, prepared: Sequence[_Prepared]) -> tuple[float, float, float]:
    """Mean reward, recall@1 of the best snippet, and mean gradient norm."""
    rewards, hits, norms = [], [], []
    for p in prepared:
        r, scores, grad = reward_and_gradient(params, p.texts, p.query, p.mp)
        rewards.append(r)
        hits.append(int(np.argmax(scores)) == p.mp)
        norms.append(float(np.linalg.norm(grad)))
    return float(np.mean(rewards)), float(np.mean(hits)), float(np.mean(norms))


def write_metrics(metrics: Sequence[TrainMetrics], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["epoch", "mean_reward", "recall_at_1", "gradient_norm"])
        for m in metrics:
            w.writerow([m.epoch, repr(m.mean_reward), repr(m.recall_at_1), repr(m.gradient_norm)])


def train(config: TrainConfig, dataset: Sequence[RewardSample], backend: Backend,
          out_dir: str | Path | None = None, init: EmbedderParams | None = None,
          refresh: Callable[[int], Sequence[RewardSample]] | None = None) -> TrainResult:
    """Train the embedder; epoch 0 in the metrics is the untrained initialization.

    Each later row evaluates the weights at the end of that epoch over the
    whole dataset; ``gradient_norm`` there is the mean pre-clipping norm of the
    updates applied during the epoch. With ``config.resample_each_epoch`` and a
    ``refresh`` callback, epoch ``e`` trains on ``refresh(e)`` (fresh candidates)
    instead of the precomputed dataset.
    """
    if not dataset:
        raise InvalidConfigError("training dataset is empty")
    prepared = prepare(dataset, backend)
    if not prepared:
        raise InvalidConfigError("no usable training samples")
    params = init or EmbedderParams.random(config.dim, config.buckets, named_rng(config.seed, "init"))
    order_rng = named_rng(config.seed, "dataset")
    state = OptimizerState.for_config(config)
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)

    r0, rec0, g0 = evaluate(params, prepared)
    metrics = [TrainMetrics(0, r0, rec0, g0)]
    checkpoints = []
    for epoch in range(1, config.epochs + 1):
        if config.resample_each_epoch and refresh is not None and epoch > 1:
            prepared = prepare(refresh(epoch), backend) or prepared
        order = np.concatenate([order_rng.permutation(len(prepared))
                                for _ in range(-(-config.samples_per_epoch // len(prepared)))])
        norms = []
        for i in order[: config.samples_per_epoch]:
            p = prepared[i]
            _, _, grad = reward_and_gradient(params, p.texts, p.query, p.mp)
            params, norm = _apply(params, grad, state, config.learning_rate, config.clip_norm)
            norms.append(norm)
        r, rec, _ = evaluate(params, prepared)
        metrics.append(TrainMetrics(epoch, r, rec, float(np.mean(norms))))
        log.info("epoch %d: reward %.4f recall@1 %.3f", epoch, r, rec)
        if out is not None and config.checkpoint_every and epoch % config.checkpoint_every == 0:
            path = out / f"checkpoint_epoch{epoch}.json"
            params.save(path)
            checkpoints.append(path)

    result = TrainResult(params, metrics, checkpoints=checkpoints)
    if out is not None:
        result.checkpoint = out / "checkpoint.json"
        params.save(result.checkpoint)
        result.metrics_path = out / "metrics.csv"
        write_metrics(metrics, result.metrics_path)
    return result
