"""Rule induction by chi-square selection (G&T) and the simple Bayes classifier."""

import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple, Optional, Sequence, Union

import numpy as np
from scipy.special import logsumexp
from scipy.stats import chi2, norm

from .config import DEFAULT_CONFIDENCE_LEVEL, DEFAULT_SMOOTHING
from .dataset import Dataset
from .errors import DataError, ModelFormatError, NoPredictionError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ContingencyTable:
    """2x2 counts: rows attribute present/absent, columns in class/not in class."""

    a: int
    b: int
    c: int
    d: int

    def __post_init__(self):
        if min(self.a, self.b, self.c, self.d) < 0:
            raise ValueError("Contingency counts must be nonnegative")
        if self.n < 1:
            raise ValueError("Contingency table must hold at least one example")

    @property
    def n(self) -> int:
        return self.a + self.b + self.c + self.d

    @property
    def marginals(self) -> tuple[int, int, int, int]:
        """Row sums then column sums."""
        return (
            self.a + self.b,
            self.c + self.d,
            self.a + self.c,
            self.b + self.d,
        )

    @property
    def is_degenerate(self) -> bool:
        """True when a marginal is zero and the statistic is undefined."""
        return 0 in self.marginals


def chi_square(t: ContingencyTable) -> float:
    """Pearson's chi-square statistic without continuity correction.

    Degenerate tables (a zero marginal) give 0.0.
    """
    if t.is_degenerate:
        logger.debug("Degenerate contingency table %s", t)
        return 0.0
    r1, r2, c1, c2 = t.marginals
    return t.n * (t.a * t.d - t.b * t.c) ** 2 / (r1 * r2 * c1 * c2)


def chi_square_pvalue(t: ContingencyTable) -> float:
    """Upper-tail probability of :func:`chi_square` with one degree of freedom."""
    return float(chi2.sf(chi_square(t), df=1))


def confidence_interval(
    successes: int, n: int, level: float = DEFAULT_CONFIDENCE_LEVEL
) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion, clipped to [0, 1].

    Raises:
        ValueError: If n is zero, successes exceeds n or level is outside (0, 1)
    """
    if n <= 0:
        raise ValueError("Confidence interval needs n >= 1")
    if not 0 <= successes <= n:
        raise ValueError(f"successes must lie in [0, {n}], got {successes}")
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")

    z = float(norm.ppf(1.0 - (1.0 - level) / 2.0))
    p = successes / n
    z2 = z * z
    denom = 1.0 + z2 / n
    centre = (p + z2 / (2 * n)) / denom
    half = z / denom * math.sqrt(p * (1.0 - p) / n + z2 / (4 * n * n))
    low = 0.0 if successes == 0 else max(0.0, centre - half)
    high = 1.0 if successes == n else min(1.0, centre + half)
    return low, high


# G&T rule learner

Condition = tuple[tuple[str, bool], ...]
Splits = tuple[tuple[float, float], ...]


@dataclass(frozen=True)
class RuleLeaf:
    """One include/exclude path of the partition tree and its class probability.

    ``splits`` holds the chi-square statistic and its p-value for the split
    behind each condition, in condition order. Leaves read from rule files
    written without statistics have none.
    """

    class_id: str
    condition: Condition
    p: float
    ci_low: float
    ci_high: float
    support_n: int
    splits: Splits = ()

    def __post_init__(self):
        if not self.ci_low <= self.p <= self.ci_high:
            raise ValueError(
                f"Interval [{self.ci_low}, {self.ci_high}] does not contain p={self.p}"
            )
        if self.splits and len(self.splits) != len(self.condition):
            raise ValueError(
                f"{len(self.splits)} split statistics for {len(self.condition)} conditions"
            )

    def matches(self, x: Sequence[float], attribute_names: Sequence[str]) -> bool:
        index = {name: i for i, name in enumerate(attribute_names)}
        return all((x[index[name]] == 1.0) == include for name, include in self.condition)

    def condition_text(self) -> str:
        if not self.condition:
            return "*"
        return " ".join(f"{'+' if include else '-'}{name}" for name, include in self.condition)


@dataclass(frozen=True)
class RuleSet:
    """Leaves learned for one class; their conditions are mutually exclusive."""

    class_id: str
    attribute_names: tuple[str, ...]
    leaves: tuple[RuleLeaf, ...] = ()

    def match(self, x: Sequence[float]) -> Optional[RuleLeaf]:
        """Return the leaf whose condition ``x`` satisfies, if any."""
        for leaf in self.leaves:
            if leaf.matches(x, self.attribute_names):
                return leaf
        return None


class GtPrediction(NamedTuple):
    class_id: str
    p: float
    interval: tuple[float, float]


def _require_binary(ds: Dataset) -> None:
    if not ds.is_binary:
        raise DataError("Attributes must be binary (0/1) for this learner")


def _contingency(column: np.ndarray, member: np.ndarray) -> ContingencyTable:
    present = column == 1.0
    return ContingencyTable(
        int(np.sum(present & member)),
        int(np.sum(present & ~member)),
        int(np.sum(~present & member)),
        int(np.sum(~present & ~member)),
    )


def gt_learn(
    ds: Dataset,
    class_id: str,
    min_leaf: int = 1,
    max_depth: Optional[int] = None,
    level: float = DEFAULT_CONFIDENCE_LEVEL,
) -> RuleSet:
    """Learn include/exclude rules for ``class_id`` against the other classes.

    At each node the attribute with the highest chi-square (lowest index on
    ties) splits the examples into those including and excluding it. A node
    becomes a leaf when it is homogeneous in class membership, reaches
    ``max_depth``, has no attribute with positive chi-square, or cannot be
    split into two parts of at least ``min_leaf`` examples.

    Args:
        ds: Binary-attribute training set
        class_id: Class learned against the rest
        min_leaf: Smallest number of examples allowed in a split part
        max_depth: Largest number of conditions per leaf (attribute count
            when omitted)
        level: Confidence level of the Wilson interval stored in each leaf

    Returns:
        RuleSet whose leaves partition the attribute space

    Raises:
        DataError: On an unknown class or non-binary attributes
    """
    if class_id not in ds.class_set:
        raise DataError(f"Unknown class: {class_id!r}")
    _require_binary(ds)
    if min_leaf < 1:
        raise ValueError(f"min_leaf must be >= 1, got {min_leaf}")
    depth_cap = ds.n_attributes if max_depth is None else max_depth

    X = ds.features_matrix()
    member = np.array([label == class_id for label in ds.labels], dtype=bool)
    leaves: list[RuleLeaf] = []

    def make_leaf(rows: np.ndarray, condition: Condition, splits: Splits) -> None:
        n = len(rows)
        hits = int(np.sum(member[rows]))
        low, high = confidence_interval(hits, n, level)
        leaves.append(RuleLeaf(class_id, condition, hits / n, low, high, n, splits))

    # Explicit stack; children are pushed exclude-first so leaves come out
    # include-first in depth-first order.
    stack: list[tuple[np.ndarray, Condition, Splits]] = [(np.arange(len(ds)), (), ())]
    while stack:
        rows, condition, splits = stack.pop()
        if len(rows) == 0:
            continue
        hits = int(np.sum(member[rows]))
        if hits in (0, len(rows)) or len(condition) >= depth_cap:
            make_leaf(rows, condition, splits)
            continue

        best, best_score = -1, 0.0
        best_table: Optional[ContingencyTable] = None
        for attr in range(ds.n_attributes):
            table = _contingency(X[rows, attr], member[rows])
            present = table.a + table.b
            if min(present, len(rows) - present) < min_leaf:
                continue
            score = chi_square(table)
            if score > best_score:
                best, best_score, best_table = attr, score, table

        if best_table is None:
            make_leaf(rows, condition, splits)
            continue

        name = ds.attribute_names[best]
        present = X[rows, best] == 1.0
        child_splits = splits + ((best_score, chi_square_pvalue(best_table)),)
        stack.append((rows[~present], condition + ((name, False),), child_splits))
        stack.append((rows[present], condition + ((name, True),), child_splits))

    return RuleSet(class_id, ds.attribute_names, tuple(leaves))


def gt_learn_all(
    ds: Dataset,
    min_leaf: int = 1,
    max_depth: Optional[int] = None,
    level: float = DEFAULT_CONFIDENCE_LEVEL,
) -> list[RuleSet]:
    """Run :func:`gt_learn` once per class, in class order."""
    return [gt_learn(ds, c, min_leaf, max_depth, level) for c in ds.class_set]


def gt_predict(rulesets: Sequence[RuleSet], x: Sequence[float]) -> GtPrediction:
    """Predict the class whose matching leaf has the highest probability.

    Ties go to the lexicographically smaller class id. Classes with no
    matching leaf are skipped.

    Raises:
        NoPredictionError: If no class has a matching leaf
    """
    candidates = []
    for ruleset in rulesets:
        if len(x) != len(ruleset.attribute_names):
            raise DataError(
                f"Dimension mismatch: rules expect {len(ruleset.attribute_names)}, "
                f"got {len(x)}"
            )
        leaf = ruleset.match(x)
        if leaf is None:
            logger.debug("No leaf of class %s matches %s", ruleset.class_id, x)
            continue
        candidates.append(leaf)

    if not candidates:
        raise NoPredictionError("no prediction: no rule set has a matching leaf")

    best = min(candidates, key=lambda leaf: (-leaf.p, leaf.class_id))
    return GtPrediction(best.class_id, best.p, (best.ci_low, best.ci_high))


def _format_floats(values: Sequence[float]) -> str:
    return " ".join(repr(v) for v in values) if values else "*"


def format_rulesets(rulesets: Sequence[RuleSet]) -> str:
    """Serialise rule sets, one leaf per line, with an attribute header.

    The last two fields list the chi-square statistic and p-value of each
    split on the leaf's path, space separated, or ``*`` for a root leaf.
    """
    names = rulesets[0].attribute_names if rulesets else ()
    lines = ["#attributes\t" + "\t".join(names)]
    for ruleset in rulesets:
        for leaf in ruleset.leaves:
            lines.append(
                f"{leaf.class_id}\t{leaf.condition_text()}\t{leaf.p!r}\t"
                f"{leaf.ci_low!r}\t{leaf.ci_high!r}\t{leaf.support_n}\t"
                f"{_format_floats([s for s, _ in leaf.splits])}\t"
                f"{_format_floats([p for _, p in leaf.splits])}"
            )
    return "\n".join(lines) + "\n"


def _parse_condition(text: str, lineno: int) -> Condition:
    if text == "*":
        return ()
    condition = []
    for token in text.split():
        if len(token) < 2 or token[0] not in "+-":
            raise ModelFormatError(f"Line {lineno}: bad condition token {token!r}")
        condition.append((token[1:], token[0] == "+"))
    return tuple(condition)


def _parse_splits(statistics: str, pvalues: str, lineno: int) -> Splits:
    if statistics == "*" and pvalues == "*":
        return ()
    try:
        chi = [float(v) for v in statistics.split()]
        p = [float(v) for v in pvalues.split()]
    except ValueError:
        raise ModelFormatError(f"Line {lineno}: bad split statistics") from None
    if len(chi) != len(p):
        raise ModelFormatError(
            f"Line {lineno}: {len(chi)} statistics but {len(p)} p-values"
        )
    return tuple(zip(chi, p))


def parse_rulesets(text: str) -> list[RuleSet]:
    """Inverse of :func:`format_rulesets`.

    Rule sets with no leaves cannot be represented and are not returned.
    Lines without the two split-statistic fields are accepted and give
    leaves with no ``splits``.
    """
    lines = text.splitlines()
    if not lines or not lines[0].startswith("#attributes"):
        raise ModelFormatError("Rule file must start with an #attributes header")
    names = tuple(lines[0].split("\t")[1:])

    grouped: dict[str, list[RuleLeaf]] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        fields = line.split("\t")
        if len(fields) not in (6, 8):
            raise ModelFormatError(
                f"Line {lineno}: expected 6 or 8 fields, found {len(fields)}"
            )
        class_id, condition, p, low, high, support = fields[:6]
        parsed = _parse_condition(condition, lineno)
        splits = _parse_splits(fields[6], fields[7], lineno) if len(fields) == 8 else ()
        unknown = [attr for attr, _ in parsed if attr not in names]
        if unknown:
            raise ModelFormatError(f"Line {lineno}: unknown attribute {unknown[0]!r}")
        try:
            leaf = RuleLeaf(
                class_id, parsed, float(p), float(low), float(high), int(support), splits
            )
        except ValueError as e:
            raise ModelFormatError(f"Line {lineno}: {e}") from None
        grouped.setdefault(class_id, []).append(leaf)

    return [RuleSet(c, names, tuple(leaves)) for c, leaves in grouped.items()]


# Simple Bayes


@dataclass(frozen=True, eq=False)
class NbModel:
    """Class priors and per-class Bernoulli attribute probabilities.

    ``conditionals[c, i]`` is ``P(attribute i = 1 | class c)``.
    """

    classes: tuple[str, ...]
    attribute_names: tuple[str, ...]
    class_priors: np.ndarray
    conditionals: np.ndarray
    smoothing: float = DEFAULT_SMOOTHING

    def __post_init__(self):
        priors = np.asarray(self.class_priors, dtype=float)
        conditionals = np.asarray(self.conditionals, dtype=float)
        object.__setattr__(self, "class_priors", priors)
        object.__setattr__(self, "conditionals", conditionals)
        if priors.shape != (len(self.classes),):
            raise DataError("One prior per class is required")
        if conditionals.shape != (len(self.classes), len(self.attribute_names)):
            raise DataError("Conditionals must have shape (classes, attributes)")
        if abs(float(np.sum(priors)) - 1.0) > 1e-12:
            raise DataError(f"Class priors sum to {np.sum(priors)}, not 1")
        if np.any(conditionals < 0) or np.any(conditionals > 1):
            raise DataError("Conditional probabilities must lie in [0, 1]")


def nb_train(ds: Dataset, smoothing: float = DEFAULT_SMOOTHING) -> NbModel:
    """Estimate a simple Bayes model with additive smoothing.

    ``P(c) = (n_c + s) / (n + s * K)`` and
    ``P(x_i = 1 | c) = (n_{c,i} + s) / (n_c + 2 s)``.

    Raises:
        DataError: On an empty dataset, non-binary attributes, or a class
            without examples when smoothing is zero
    """
    if len(ds) == 0:
        raise DataError("Cannot train on an empty dataset")
    if smoothing < 0:
        raise ValueError(f"smoothing must be nonnegative, got {smoothing}")
    _require_binary(ds)

    X = ds.features_matrix()
    labels = np.array(ds.labels)
    classes = ds.class_set
    counts = np.array([np.sum(labels == c) for c in classes], dtype=float)
    if smoothing == 0 and np.any(counts == 0):
        empty = classes[int(np.argmin(counts))]
        raise DataError(f"Class {empty!r} has no examples and smoothing is zero")

    ones = np.array([X[labels == c].sum(axis=0) for c in classes], dtype=float)
    priors = (counts + smoothing) / (len(ds) + smoothing * len(classes))
    conditionals = (ones + smoothing) / (counts[:, None] + 2.0 * smoothing)
    return NbModel(classes, ds.attribute_names, priors, conditionals, smoothing)


def nb_log_joint(m: NbModel, x: Sequence[float]) -> np.ndarray:
    """``log P(c) + sum_i log P(x_i | c)`` for every class."""
    x = np.asarray(x, dtype=float)
    if x.shape != (len(m.attribute_names),):
        raise DataError(
            f"Dimension mismatch: model expects {len(m.attribute_names)}, "
            f"got {x.shape[-1]}"
        )
    if not np.all((x == 0.0) | (x == 1.0)):
        raise DataError("Features must be binary (0/1)")

    with np.errstate(divide="ignore"):
        log_on = np.log(m.conditionals)
        log_off = np.log1p(-m.conditionals)
        log_prior = np.log(m.class_priors)
    on = x == 1.0
    return log_prior + np.where(on, log_on, log_off).sum(axis=1)


def nb_predict(m: NbModel, x: Sequence[float]) -> dict[str, float]:
    """Posterior ``P(c | x)`` for every class, normalised in log space.

    Raises:
        DataError: On a dimension mismatch or non-binary features
        NoPredictionError: If every class has zero joint probability
    """
    log_joint = nb_log_joint(m, x)
    total = logsumexp(log_joint)
    if not np.isfinite(total):
        raise NoPredictionError("no prediction: every class has zero probability")
    posterior = np.exp(log_joint - total)
    return {c: float(p) for c, p in zip(m.classes, posterior)}


def nb_classify(m: NbModel, x: Sequence[float]) -> tuple[str, float]:
    """Most probable class and its posterior (ties to the smaller class id)."""
    posterior = nb_predict(m, x)
    best = min(posterior, key=lambda c: (-posterior[c], c))
    return best, posterior[best]


def save_nb_model(m: NbModel, path: Union[str, Path]) -> None:
    data = {
        "classes": list(m.classes),
        "attribute_names": list(m.attribute_names),
        "class_priors": m.class_priors.tolist(),
        "conditionals": m.conditionals.tolist(),
        "smoothing": m.smoothing,
    }
    with open(path, "w") as f:
        json.dump(data, f, indent=2)
        f.write("\n")


def load_nb_model(path: Union[str, Path]) -> NbModel:
    try:
        with open(path, "r") as f:
            data = json.load(f)
        return NbModel(
            tuple(data["classes"]),
            tuple(data["attribute_names"]),
            np.array(data["class_priors"], dtype=float),
            np.array(data["conditionals"], dtype=float),
            float(data["smoothing"]),
        )
    except (json.JSONDecodeError, KeyError, TypeError) as e:
        raise ModelFormatError(f"Invalid simple Bayes model {path}: {e}") from None
