"""Transductive prediction with confidence by retraining on both labelings.

The new example is added to the training set twice: once hypothesised BLACK
(+1) and once WHITE (-1). Each augmented set ("picture") is trained
independently and the support-vector sets of the two pictures decide the
label:

* WHITE when x is an SV of the black picture only, or of both with
  ``#SV(B) < #SV(W)``; confidence ``1 - #SV(B) / l``.
* BLACK symmetrically; confidence ``1 - #SV(W) / l``.
* NONE when x is an SV of both and the counts are equal.

``l`` is the size of the augmented set and the counts include x itself.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

from .config import DEFAULT_BOX_C, DEFAULT_SV_TOLERANCE, DEFAULT_SVM_TOL
from .dataset import NEGATIVE_LABEL, POSITIVE_LABEL, Dataset, Example
from .errors import DataError
from .svm import KernelSpec, SvmModel, predict, train

logger = logging.getLogger(__name__)


class Verdict(str, Enum):
    BLACK = "BLACK"
    WHITE = "WHITE"
    NONE = "NONE"


@dataclass(frozen=True)
class TransductiveVerdict:
    """Outcome of the transductive rule for one query point."""

    label: Verdict
    confidence: Optional[float]
    sv_count_black: int
    sv_count_white: int
    in_sv_black: bool
    in_sv_white: bool
    fallback: bool = False

    def __post_init__(self):
        if (self.confidence is None) != (self.label is Verdict.NONE):
            raise ValueError("confidence must be present iff the label is not NONE")
        if self.confidence is not None and not 0.0 <= self.confidence <= 1.0:
            raise ValueError(f"confidence outside [0, 1]: {self.confidence}")


def _picture(
    train_set: Dataset,
    x: tuple[float, ...],
    label: str,
    k: KernelSpec,
    box_c: float,
    tol: float,
    sv_tolerance: float,
) -> SvmModel:
    return train(
        train_set.extended(Example(x, label)),
        k,
        box_c=box_c,
        tol=tol,
        sv_tolerance=sv_tolerance,
    )


def classify_with_confidence(
    train_set: Dataset,
    x: Sequence[float],
    k: KernelSpec,
    box_c: float = DEFAULT_BOX_C,
    tol: float = DEFAULT_SVM_TOL,
    sv_tolerance: float = DEFAULT_SV_TOLERANCE,
) -> TransductiveVerdict:
    """Label ``x`` BLACK, WHITE or NONE from the black and white pictures.

    Args:
        train_set: Training examples labeled +1 (BLACK) / -1 (WHITE)
        x: Query feature vector
        k: Kernel used for both pictures
        box_c: Box constraint; soft margin keeps both pictures feasible
        tol: Solver KKT tolerance
        sv_tolerance: Multiplier threshold for support-vector membership

    Returns:
        TransductiveVerdict

    Raises:
        DataError: On a single-class training set or a dimension mismatch
    """
    point = tuple(float(v) for v in x)
    if len(point) != train_set.n_attributes:
        raise DataError(
            f"Dimension mismatch: training set has {train_set.n_attributes} "
            f"attributes, query has {len(point)}"
        )

    black = _picture(train_set, point, POSITIVE_LABEL, k, box_c, tol, sv_tolerance)
    white = _picture(train_set, point, NEGATIVE_LABEL, k, box_c, tol, sv_tolerance)

    l = len(train_set) + 1
    new_index = l - 1
    sv_black, sv_white = black.n_support, white.n_support
    in_black = bool(black.alphas[new_index] > sv_tolerance)
    in_white = bool(white.alphas[new_index] > sv_tolerance)

    def verdict(label: Verdict, confidence: Optional[float], fallback=False):
        return TransductiveVerdict(
            label, confidence, sv_black, sv_white, in_black, in_white, fallback
        )

    if in_black and (not in_white or sv_black < sv_white):
        return verdict(Verdict.WHITE, 1.0 - sv_black / l)
    if in_white and (not in_black or sv_white < sv_black):
        return verdict(Verdict.BLACK, 1.0 - sv_white / l)
    if in_black and in_white:
        return verdict(Verdict.NONE, None)

    # Only reachable through numerical tolerance: x supports neither picture.
    base = train(
        train_set, k, box_c=box_c, tol=tol, sv_tolerance=sv_tolerance
    )
    label = Verdict.BLACK if predict(base, point) > 0 else Verdict.WHITE
    logger.warning(
        "Query is a support vector in neither picture; "
        "falling back to the inductive prediction %s",
        label.value,
    )
    return verdict(label, 1.0 - max(sv_black, sv_white) / l, fallback=True)


def batch_transduce(
    train_set: Dataset,
    test: Dataset,
    k: KernelSpec,
    box_c: float = DEFAULT_BOX_C,
    tol: float = DEFAULT_SVM_TOL,
    sv_tolerance: float = DEFAULT_SV_TOLERANCE,
    workers: int = 1,
) -> list[TransductiveVerdict]:
    """Apply :func:`classify_with_confidence` to every test example.

    Test labels are ignored. Test points never join the training set, so
    ``workers > 1`` evaluates them concurrently; results stay in test order.
    """
    if test.n_attributes != train_set.n_attributes:
        raise DataError(
            f"Dimension mismatch: training set has {train_set.n_attributes} "
            f"attributes, test set has {test.n_attributes}"
        )

    def classify(example: Example) -> TransductiveVerdict:
        return classify_with_confidence(
            train_set, example.features, k, box_c, tol, sv_tolerance
        )

    if workers <= 1 or len(test) <= 1:
        return [classify(example) for example in test]

    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(classify, test))


def format_verdicts(verdicts: Sequence[TransductiveVerdict]) -> str:
    """Render verdicts as TSV, one row per test point."""
    rows = ["index\tlabel\tconfidence\tsv_black\tsv_white\tfallback"]
    for index, v in enumerate(verdicts):
        confidence = "" if v.confidence is None else f"{v.confidence:.6f}"
        rows.append(
            f"{index}\t{v.label.value}\t{confidence}\t{v.sv_count_black}\t"
            f"{v.sv_count_white}\t{int(v.fallback)}"
        )
    return "\n".join(rows) + "\n"
