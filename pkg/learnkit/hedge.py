"""The Aggregating Algorithm over a finite pool of experts.

Weights follow ``w <- w * exp(-eta * loss)`` renormalised. Two merging rules
are provided: the weighted mean of the experts' probabilities for log loss
(Bayes mixture) and the weighted majority vote for zero-one loss.
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np
from scipy.special import logsumexp

from .config import DEFAULT_LOG_LOSS_CAP
from .errors import DataError

logger = logging.getLogger(__name__)

THRESHOLD = 0.5


class LossKind(str, Enum):
    LOG = "log"
    ZERO_ONE = "zero_one"


@dataclass(frozen=True, eq=False)
class ExpertPool:
    """Normalised log-weights over the experts plus the learning rate.

    Weights are kept in log space so that they stay strictly positive over
    long streams.
    """

    log_weights: np.ndarray
    eta: float
    loss_kind: LossKind = LossKind.LOG

    def __post_init__(self):
        log_weights = np.asarray(self.log_weights, dtype=float)
        if log_weights.ndim != 1 or len(log_weights) == 0:
            raise ValueError("An expert pool needs at least one expert")
        if not np.all(np.isfinite(log_weights)):
            raise ValueError("Log-weights must be finite")
        if not self.eta > 0 or not math.isfinite(self.eta):
            raise ValueError(f"eta must be a positive finite number, got {self.eta}")
        object.__setattr__(self, "log_weights", log_weights - logsumexp(log_weights))
        object.__setattr__(self, "loss_kind", LossKind(self.loss_kind))

    @property
    def size(self) -> int:
        return len(self.log_weights)

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)


def init_pool(
    k: int,
    prior: Optional[Sequence[float]] = None,
    eta: float = 1.0,
    loss_kind: LossKind = LossKind.LOG,
) -> ExpertPool:
    """Create a pool of ``k`` experts with uniform or given prior weights.

    Raises:
        ValueError: If k < 1, the prior has the wrong length, or a prior entry
            is not positive
    """
    if k < 1:
        raise ValueError("A pool needs k >= 1 experts")
    if prior is None:
        return ExpertPool(np.full(k, -math.log(k)), eta, loss_kind)

    prior = np.asarray(prior, dtype=float)
    if prior.shape != (k,):
        raise ValueError(f"Prior has {prior.size} entries, expected {k}")
    if np.any(~(prior > 0)) or not np.all(np.isfinite(prior)):
        raise ValueError("nonpositive weight in prior")
    return ExpertPool(np.log(prior), eta, loss_kind)


def _check_predictions(pool: ExpertPool, predictions: Sequence[float]) -> np.ndarray:
    values = np.asarray(predictions, dtype=float)
    if values.shape != (pool.size,):
        raise DataError(f"Expected {pool.size} predictions, got {values.size}")
    if np.any(~((values >= 0.0) & (values <= 1.0))):
        raise DataError("Predictions must lie in [0, 1]")
    return values


def _votes(values: np.ndarray) -> np.ndarray:
    """Threshold predictions at 0.5; exactly 0.5 is a half vote."""
    return np.where(values > THRESHOLD, 1.0, np.where(values < THRESHOLD, 0.0, 0.5))


def merge(pool: ExpertPool, predictions: Sequence[float]) -> float:
    """Combine the experts' predictions according to their weights.

    Log loss gives the weighted mean (Bayes mixture). Zero-one loss gives the
    weighted majority vote: 1.0 or 0.0, or 0.5 when the vote is tied.
    """
    values = _check_predictions(pool, predictions)
    weights = pool.weights
    if pool.loss_kind is LossKind.LOG:
        return float(np.clip(weights @ values, 0.0, 1.0))

    votes = _votes(values)
    weight_one = float(weights @ votes)
    weight_zero = float(weights @ (1.0 - votes))
    if math.isclose(weight_one, weight_zero, rel_tol=1e-12, abs_tol=1e-15):
        return 0.5
    return 1.0 if weight_one > weight_zero else 0.0


def update(pool: ExpertPool, losses: Sequence[float]) -> ExpertPool:
    """Return a new pool with weights multiplied by ``exp(-eta * loss)``.

    Raises:
        DataError: On a length mismatch, negative or non-finite losses
    """
    values = np.asarray(losses, dtype=float)
    if values.shape != (pool.size,):
        raise DataError(f"Expected {pool.size} losses, got {values.size}")
    if not np.all(np.isfinite(values)):
        raise DataError("Losses must be finite")
    if np.any(values < 0):
        raise DataError("Losses must be nonnegative")
    return ExpertPool(pool.log_weights - pool.eta * values, pool.eta, pool.loss_kind)


def expert_loss(
    prediction: float,
    outcome: int,
    loss_kind: LossKind,
    cap: float = DEFAULT_LOG_LOSS_CAP,
) -> float:
    """Loss of one prediction once the outcome is known.

    Log loss is ``-ln|p - (1 - outcome)|`` capped at ``cap``; zero-one loss
    compares the thresholded prediction with the outcome (a 0.5 prediction
    costs 0.5).
    """
    if LossKind(loss_kind) is LossKind.LOG:
        likelihood = abs(prediction - (1 - outcome))
        if likelihood <= 0.0:
            return cap
        return min(cap, max(0.0, -math.log(likelihood)))
    vote = float(_votes(np.array([prediction]))[0])
    return abs(vote - outcome)


@dataclass(frozen=True, eq=False)
class RoundRecord:
    """What happened in one round of a stream."""

    round: int
    merged: float
    outcome: int
    merged_loss: float
    losses: np.ndarray
    weights: np.ndarray


@dataclass(frozen=True, eq=False)
class StreamTrace:
    """Per-round records plus the pool after the last round."""

    records: list[RoundRecord] = field(default_factory=list)
    final_pool: Optional[ExpertPool] = None


Round = tuple[Sequence[float], int]


def run_stream(
    pool: ExpertPool,
    rounds: Sequence[Round],
    loss_cap: float = DEFAULT_LOG_LOSS_CAP,
) -> StreamTrace:
    """Merge, observe, score and update, once per round.

    Args:
        pool: Starting pool
        rounds: ``(expert predictions, outcome)`` pairs, outcomes in {0, 1}
        loss_cap: Largest log loss charged in one round

    Returns:
        StreamTrace; ``weights`` in each record are the weights after the update
    """
    records = []
    for index, (predictions, outcome) in enumerate(rounds, start=1):
        if outcome not in (0, 1):
            raise DataError(f"Round {index}: outcome must be 0 or 1, got {outcome}")
        merged = merge(pool, predictions)
        losses = np.array(
            [expert_loss(p, outcome, pool.loss_kind, loss_cap) for p in predictions]
        )
        merged_loss = expert_loss(merged, outcome, pool.loss_kind, loss_cap)
        pool = update(pool, losses)
        records.append(
            RoundRecord(index, merged, int(outcome), merged_loss, losses, pool.weights)
        )
    logger.debug("Stream of %d rounds over %d experts", len(records), pool.size)
    return StreamTrace(records, pool)


@dataclass(frozen=True)
class CumulativeLosses:
    merged: float
    experts: tuple[float, ...]

    @property
    def best_expert(self) -> float:
        return min(self.experts) if self.experts else 0.0

    @property
    def regret(self) -> float:
        return self.merged - self.best_expert


def cumulative_losses(trace: StreamTrace) -> CumulativeLosses:
    """Total loss of the merged predictions and of every expert."""
    if not trace.records:
        size = trace.final_pool.size if trace.final_pool is not None else 0
        return CumulativeLosses(0.0, (0.0,) * size)
    merged = math.fsum(r.merged_loss for r in trace.records)
    experts = np.sum([r.losses for r in trace.records], axis=0)
    return CumulativeLosses(merged, tuple(float(v) for v in experts))


def load_stream(path: Union[str, Path]) -> list[Round]:
    """Read a TSV stream: K prediction columns then an outcome column.

    Blank lines and lines starting with ``#`` are skipped.

    Raises:
        DataError: On non-numeric cells, ragged rows or bad outcomes
    """
    rounds: list[Round] = []
    width = None
    with open(path, "r") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            cells = line.split("\t")
            if width is None:
                width = len(cells)
                if width < 2:
                    raise DataError(
                        f"Line {lineno}: need at least one prediction and an outcome"
                    )
            if len(cells) != width:
                raise DataError(f"Line {lineno}: expected {width} columns, found {len(cells)}")
            try:
                predictions = [float(v) for v in cells[:-1]]
                outcome = float(cells[-1])
            except ValueError:
                raise DataError(f"Line {lineno}: non-numeric value") from None
            if outcome not in (0.0, 1.0):
                raise DataError(f"Line {lineno}: outcome must be 0 or 1")
            rounds.append((predictions, int(outcome)))
    return rounds


def format_trace(trace: StreamTrace, n_experts: int) -> str:
    """TSV of round, merged prediction and weights (8 decimals)."""
    header = ["round", "merged"] + [f"w{i + 1}" for i in range(n_experts)]
    lines = ["\t".join(header)]
    for record in trace.records:
        cells = [str(record.round), f"{record.merged:.8f}"]
        cells += [f"{w:.8f}" for w in record.weights]
        lines.append("\t".join(cells))
    return "\n".join(lines) + "\n"
