"""Strongly-adaptive combiner over black-box interval learners.

Maintains a positive weight per active dyadic interval, updates it
multiplicatively from each learner's estimated regret (its loss versus the
weight-averaged ensemble loss, rescaled into [-1, 1]), and emits the convex
combination of the learner estimates. Estimates are opaque: anything
supporting addition and scalar multiplication works.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Any, Iterable

from .rice import DyadicInterval

# rescale whole weight map when its sum leaves this band (pure scaling:
# the regret and combination formulas are invariant to it)
_SUM_LO = 1e-30
_SUM_HI = 1e30


@dataclass(frozen=True)
class LearnerOutput:
    """One learner's post-update estimate and its loss on the current step."""

    interval: DyadicInterval
    estimate: Any
    loss: float

    def __post_init__(self):
        if not math.isfinite(self.loss):
            raise ValueError(f"non-finite loss for interval {self.interval}")


@dataclass(frozen=True)
class EnsembleWeights:
    """Positive weight per active interval; treat as an immutable value."""

    entries: dict[DyadicInterval, float]


def weight_rate(interval: DyadicInterval) -> float:
    """Per-interval update rate min(1/2, 1/sqrt(length)); also the initial weight."""
    return min(0.5, 1.0 / math.sqrt(interval.length))


def empty_weights() -> EnsembleWeights:
    return EnsembleWeights({})


def _check_cover(weights: EnsembleWeights, intervals: Iterable[DyadicInterval]) -> None:
    if set(weights.entries) != set(intervals):
        raise ValueError("weights do not cover exactly the given intervals")


def combine(weights: EnsembleWeights, outputs: list[LearnerOutput]):
    """Convex combination sum_I w(I) theta(I) / sum_I w(I)."""
    if not outputs:
        raise ValueError("cannot combine an empty ensemble")
    _check_cover(weights, (o.interval for o in outputs))
    total = sum(weights.entries[o.interval] for o in outputs)
    acc = None
    for o in outputs:
        term = (weights.entries[o.interval] / total) * o.estimate
        acc = term if acc is None else acc + term
    return acc


def estimated_regret(
    weights: EnsembleWeights, outputs: list[LearnerOutput]
) -> dict[DyadicInterval, float]:
    """Weight-averaged ensemble loss minus each learner's own loss."""
    if not outputs:
        raise ValueError("cannot score an empty ensemble")
    _check_cover(weights, (o.interval for o in outputs))
    total = sum(weights.entries[o.interval] for o in outputs)
    avg = sum((weights.entries[o.interval] / total) * o.loss for o in outputs)
    return {o.interval: avg - o.loss for o in outputs}


def update_weights(
    weights: EnsembleWeights, regrets: dict[DyadicInterval, float]
) -> EnsembleWeights:
    """Multiplicative update w *= 1 + rate * r / max|r|.

    When all regrets vanish the multiplier is 1 (the 0/0 case is defined as
    no-op). The multiplier never drops below 1 - rate >= 1/2, so weights
    stay strictly positive.
    """
    _check_cover(weights, regrets)
    for interval, r in regrets.items():
        if not math.isfinite(r):
            raise ValueError(f"non-finite regret for interval {interval}")
    max_r = max((abs(r) for r in regrets.values()), default=0.0)
    if max_r == 0.0:
        return weights
    entries = {
        interval: w * (1.0 + weight_rate(interval) * regrets[interval] / max_r)
        for interval, w in weights.entries.items()
    }
    total = sum(entries.values())
    if entries and not (_SUM_LO <= total <= _SUM_HI):
        entries = {interval: w / total for interval, w in entries.items()}
    return EnsembleWeights(entries)


def sync_active(
    weights: EnsembleWeights, active: Iterable[DyadicInterval]
) -> EnsembleWeights:
    """Drop retired intervals; enter new ones at their initial weight."""
    return EnsembleWeights(
        {interval: weights.entries.get(interval, weight_rate(interval)) for interval in active}
    )


def ocelad_step(
    weights: EnsembleWeights,
    outputs: list[LearnerOutput],
    active_next: Iterable[DyadicInterval],
):
    """Combine, score, reweight, roll the active set; returns (estimate, weights)."""
    estimate = combine(weights, outputs)
    regrets = estimated_regret(weights, outputs)
    updated = update_weights(weights, regrets)
    return estimate, sync_active(updated, active_next)
