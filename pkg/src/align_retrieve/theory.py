"""Closed-form model of how many completions to sample.

A single sample is correct with probability ``p_s``; samples are correlated
with coefficient ``rho``. The utility of drawing ``n`` samples trades the
chance of at least one correct sample against accumulated wrong samples and
raw cost.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidParameterError, NoInteriorOptimumError


@dataclass(frozen=True)
class SamplingTheoryParams:
    p_s: float
    rho: float = 0.0
    alpha: float = 1.0
    beta: float = 0.0
    gamma: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.p_s <= 1.0:
            raise InvalidParameterError(f"p_s must lie in [0, 1], got {self.p_s}")
        if not 0.0 <= self.rho <= 1.0:
            raise InvalidParameterError(f"rho must lie in [0, 1], got {self.rho}")
        if min(self.alpha, self.beta, self.gamma) < 0:
            raise InvalidParameterError("alpha, beta and gamma must be non-negative")


def p_at_least_one(params: SamplingTheoryParams, n: float) -> float:
    """Probability that at least one of ``n`` correlated samples is correct.

    At ``rho == 1`` the effective sample count is zero and this returns 0.
    """
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    return 1.0 - (1.0 - params.p_s) ** (n * (1.0 - params.rho))


def cumulative_error(params: SamplingTheoryParams, n: float) -> float:
    if n < 0:
        raise InvalidParameterError(f"n must be >= 0, got {n}")
    return n * (1.0 - params.p_s)


def utility(params: SamplingTheoryParams, n: float) -> float:
    if n < 1:
        raise InvalidParameterError(f"n must be >= 1, got {n}")
    q = 1.0 - params.p_s
    return params.alpha * (1.0 - q ** n) - params.beta * n * q - params.gamma * n


def optimal_n(params: SamplingTheoryParams) -> float:
    """Stationary point of :func:`utility` in ``n``.

    Solves ``-alpha * q**n * ln(q) = beta * q + gamma`` with ``q = 1 - p_s``.
    """
    p, a, b, g = params.p_s, params.alpha, params.beta, params.gamma
    if not 0.0 < p < 1.0:
        raise NoInteriorOptimumError("p_s must lie strictly between 0 and 1")
    q = 1.0 - p
    cost = b * q + g
    gain = -a * math.log(q)
    if cost <= 0:
        raise NoInteriorOptimumError("utility is increasing in n without a cost term")
    if cost >= gain:
        raise NoInteriorOptimumError("marginal cost exceeds the marginal gain at n = 0")
    return math.log(cost / gain) / math.log(q)
