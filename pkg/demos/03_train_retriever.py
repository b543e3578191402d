"""Train the dense retriever with the perplexity-based reward on a planted corpus.

Each sample hides one snippet that makes the target cheap to predict. The untrained
retriever ranks it first almost never; after a few epochs it ranks it first almost always.
"""
from __future__ import annotations

from align_retrieve.backend import MockBackend
from align_retrieve.synthetic import planted_reward_dataset
from align_retrieve.trainer import TrainConfig, train

dataset = planted_reward_dataset(200, seed=0)
result = train(TrainConfig(epochs=5, samples_per_epoch=200, learning_rate=5e-5, seed=0), dataset, MockBackend())
print("epoch  mean reward  recall@1  |grad|")
for m in result.metrics:
    print(f"{m.epoch:>5}  {m.mean_reward:>11.4f}  {m.recall_at_1:>8.2f}  {m.gradient_norm:.4f}")
