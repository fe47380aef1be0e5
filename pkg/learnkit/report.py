"""Accuracy reports and text rendering of results."""

import logging
from dataclasses import dataclass, field
from typing import Optional, Sequence

from jinja2 import Environment, PackageLoader, StrictUndefined

from .bbn import BeliefRow
from .errors import DataError

logger = logging.getLogger(__name__)

NONE_LABEL = "NONE"


@dataclass(frozen=True)
class EvalReport:
    """Accuracy over the predicted examples and coverage over all of them."""

    total: int
    n: int
    correct: int
    accuracy_percent: float
    per_class: dict[str, tuple[int, int]] = field(default_factory=dict)
    coverage: float = 1.0


def _abstained(prediction: Optional[str]) -> bool:
    return prediction is None or prediction == NONE_LABEL or prediction == ""


def evaluate(
    predictions: Sequence[Optional[str]], truth: Sequence[str]
) -> EvalReport:
    """Compare predictions with the true labels.

    ``None``, empty and ``NONE`` predictions are abstentions: they are left
    out of the accuracy and lower the coverage.

    Raises:
        DataError: On empty input or a length mismatch
    """
    if len(predictions) != len(truth):
        raise DataError(
            f"{len(predictions)} predictions but {len(truth)} true labels"
        )
    if not truth:
        raise DataError("Nothing to evaluate: no predictions")

    per_class: dict[str, list[int]] = {}
    n = correct = 0
    for predicted, actual in zip(predictions, truth):
        if _abstained(predicted):
            continue
        counts = per_class.setdefault(actual, [0, 0])
        counts[0] += 1
        n += 1
        if predicted == actual:
            counts[1] += 1
            correct += 1

    if n == 0:
        logger.warning("Every prediction abstained; accuracy reported as 0.0")
    accuracy = 100.0 * correct / n if n else 0.0
    return EvalReport(
        total=len(truth),
        n=n,
        correct=correct,
        accuracy_percent=accuracy,
        per_class={c: (v[0], v[1]) for c, v in sorted(per_class.items())},
        coverage=n / len(truth),
    )


def _environment() -> Environment:
    return Environment(
        loader=PackageLoader("learnkit", "templates"),
        undefined=StrictUndefined,
        keep_trailing_newline=True,
        trim_blocks=True,
        lstrip_blocks=True,
    )


def render_report(report: EvalReport, name: str = "model") -> str:
    """Render ``report`` with the accuracy line and a comparison-table row."""
    template = _environment().get_template("eval_report.txt.j2")
    return template.render(report=report, name=name)


def render_beliefs(rows: Sequence[BeliefRow], evidence: dict[str, str]) -> str:
    """Render an Initial / Revised probability table."""
    template = _environment().get_template("belief_report.txt.j2")
    width = max([len("Characteristic")] + [len(r.node) for r in rows])
    state_width = max([len("Outcome")] + [len(r.state) for r in rows])
    return template.render(
        rows=rows, evidence=evidence, width=width, state_width=state_width
    )


def render_comparison(rows: Sequence[tuple[str, EvalReport]]) -> str:
    """Render several predictors scored on the same test set, in input order.

    Raises:
        DataError: If ``rows`` is empty or the reports cover different totals
    """
    if not rows:
        raise DataError("Nothing to compare: no predictors")
    totals = {report.total for _, report in rows}
    if len(totals) != 1:
        raise DataError(f"Predictors cover different test sets: totals {sorted(totals)}")
    template = _environment().get_template("comparison.txt.j2")
    return template.render(rows=list(rows), total=rows[0][1].total)
