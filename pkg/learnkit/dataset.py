"""Labeled examples and CSV ingestion."""

import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Sequence, Union

import numpy as np

from .errors import DataError

logger = logging.getLogger(__name__)

MODES = ("numeric", "binary")

BINARY_TOKENS = {"Y": 1.0, "N": 0.0, "1": 1.0, "0": 0.0}

POSITIVE_LABEL = "+1"
NEGATIVE_LABEL = "-1"


@dataclass(frozen=True)
class Example:
    """A feature vector with its class label."""

    features: tuple[float, ...]
    label: str

    def __post_init__(self):
        object.__setattr__(self, "features", tuple(float(v) for v in self.features))
        object.__setattr__(self, "label", str(self.label))


@dataclass(frozen=True)
class Dataset:
    """An immutable, ordered collection of examples sharing one schema."""

    attribute_names: tuple[str, ...]
    class_set: tuple[str, ...]
    examples: tuple[Example, ...] = ()
    label_name: str = "label"

    def __post_init__(self):
        object.__setattr__(self, "attribute_names", tuple(self.attribute_names))
        object.__setattr__(self, "class_set", tuple(sorted(set(self.class_set))))
        object.__setattr__(self, "examples", tuple(self.examples))

        width = len(self.attribute_names)
        known = set(self.class_set)
        for index, example in enumerate(self.examples):
            if len(example.features) != width:
                raise DataError(
                    f"Example {index} has {len(example.features)} features, "
                    f"expected {width}"
                )
            if example.label not in known:
                raise DataError(
                    f"Example {index} has label {example.label!r} "
                    f"outside the class set"
                )

    def __len__(self) -> int:
        return len(self.examples)

    def __iter__(self) -> Iterator[Example]:
        return iter(self.examples)

    def __getitem__(self, index: int) -> Example:
        return self.examples[index]

    @property
    def n_attributes(self) -> int:
        return len(self.attribute_names)

    @property
    def labels(self) -> list[str]:
        return [example.label for example in self.examples]

    @property
    def is_binary(self) -> bool:
        """True when every feature value is 0.0 or 1.0."""
        return all(v in (0.0, 1.0) for ex in self.examples for v in ex.features)

    def features_matrix(self) -> np.ndarray:
        """Return the features as an ``(n, d)`` float array."""
        if not self.examples:
            return np.zeros((0, self.n_attributes))
        return np.array([ex.features for ex in self.examples], dtype=float)

    def subset(self, indices: Iterable[int]) -> "Dataset":
        """Return the examples at ``indices`` (in that order) under the same schema."""
        return Dataset(
            self.attribute_names,
            self.class_set,
            tuple(self.examples[i] for i in indices),
            self.label_name,
        )

    def extended(self, example: Example) -> "Dataset":
        """Return a copy with ``example`` appended; its label joins the class set."""
        return Dataset(
            self.attribute_names,
            self.class_set + (example.label,),
            self.examples + (example,),
            self.label_name,
        )


@dataclass(frozen=True)
class DatasetSummary:
    """Counts describing a dataset."""

    n_examples: int
    n_attributes: int
    class_counts: dict[str, int] = field(default_factory=dict)


def _parse_cell(token: str, mode: str, row: int, column: str) -> float:
    if token == "":
        raise DataError(f"Row {row}: missing value in column {column!r}")
    if mode == "binary":
        try:
            return BINARY_TOKENS[token]
        except KeyError:
            raise DataError(
                f"Row {row}: non-binary value {token!r} in column {column!r}"
            ) from None
    try:
        return float(token)
    except ValueError:
        raise DataError(
            f"Row {row}: non-numeric value {token!r} in column {column!r}"
        ) from None


def load_csv(
    path: Union[str, Path], label_column: str, mode: str = "numeric"
) -> Dataset:
    """Load a labeled dataset from a comma-separated file.

    The first row is the header. Every other column becomes an attribute,
    in file order. Quoting is not supported.

    Args:
        path: CSV file location
        label_column: Header name of the class column
        mode: ``numeric`` parses floats, ``binary`` accepts Y/N/1/0 only

    Returns:
        Dataset with one example per data row, in file order

    Raises:
        DataError: On a missing label column, ragged rows, missing values or
            tokens the mode does not accept; the message names the row
    """
    if mode not in MODES:
        raise ValueError(f"Unknown mode: {mode}. Expected one of {MODES}")

    with open(path, "r", newline="") as f:
        lines = f.read().splitlines()

    if not lines:
        raise DataError(f"Empty file: {path}")

    header = [name.strip() for name in lines[0].split(",")]
    if label_column not in header:
        raise DataError(f"label column not found: {label_column!r}")
    label_index = header.index(label_column)
    attribute_names = tuple(n for i, n in enumerate(header) if i != label_index)

    examples = []
    for row, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = [cell.strip() for cell in line.split(",")]
        if len(cells) != len(header):
            raise DataError(
                f"Row {row}: expected {len(header)} fields, found {len(cells)}"
            )
        label = cells[label_index]
        if label == "":
            raise DataError(f"Row {row}: missing label")
        features = tuple(
            _parse_cell(cell, mode, row, header[i])
            for i, cell in enumerate(cells)
            if i != label_index
        )
        examples.append(Example(features, label))

    logger.debug("Loaded %d examples from %s", len(examples), path)
    return Dataset(
        attribute_names,
        tuple({ex.label for ex in examples}),
        tuple(examples),
        label_column,
    )


def _format_value(value: float, mode: str) -> str:
    if mode == "binary":
        if value not in (0.0, 1.0):
            raise DataError(f"Cannot write {value!r} in binary mode")
        return "1" if value == 1.0 else "0"
    return repr(value)


def write_csv(ds: Dataset, path: Union[str, Path], mode: str = "numeric") -> None:
    """Write ``ds`` as CSV: header first, label column last, ``\\n`` line endings."""
    if mode not in MODES:
        raise ValueError(f"Unknown mode: {mode}. Expected one of {MODES}")

    lines = [",".join(ds.attribute_names + (ds.label_name,))]
    for example in ds:
        values = [_format_value(v, mode) for v in example.features]
        lines.append(",".join(values + [example.label]))

    with open(path, "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def split(ds: Dataset, fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Randomly partition ``ds`` into two parts.

    The first part receives ``floor(fraction * n)`` examples. Both parts keep
    the relative order of the input.

    Raises:
        DataError: If the dataset is empty
        ValueError: If fraction is not strictly between 0 and 1
    """
    if len(ds) == 0:
        raise DataError("Cannot split an empty dataset")
    if not 0.0 < fraction < 1.0:
        raise ValueError(f"Fraction must lie in (0, 1), got {fraction}")

    n = len(ds)
    # Guard against representation error such as 0.3 * 10 = 3.0000000000000004
    # or 0.29 * 100 = 28.999999999999996.
    size = min(n, math.floor(fraction * n + 1e-9))
    order = np.random.default_rng(seed).permutation(n)
    first = sorted(int(i) for i in order[:size])
    second = sorted(int(i) for i in order[size:])
    return ds.subset(first), ds.subset(second)


def summarize(ds: Dataset) -> DatasetSummary:
    """Count examples, attributes and examples per class."""
    counts: dict[str, int] = {}
    for example in ds:
        counts[example.label] = counts.get(example.label, 0) + 1
    return DatasetSummary(len(ds), ds.n_attributes, dict(sorted(counts.items())))


def signed_labels(ds: Dataset) -> np.ndarray:
    """Return the labels of a binary dataset as a float array of +1/-1.

    Raises:
        DataError: If any label is not a +1/-1 token
    """
    values = []
    for index, label in enumerate(ds.labels):
        try:
            value = float(label)
        except ValueError:
            value = math.nan
        if value not in (1.0, -1.0):
            raise DataError(
                f"labels must be +1/-1, example {index} has {label!r}"
            )
        values.append(value)
    return np.array(values, dtype=float)


def binarize_labels(ds: Dataset, positive: str) -> Dataset:
    """Relabel ``ds`` as ``+1`` for the ``positive`` class and ``-1`` otherwise."""
    if positive not in ds.class_set:
        raise DataError(f"Unknown class: {positive!r}")
    examples = tuple(
        Example(
            ex.features, POSITIVE_LABEL if ex.label == positive else NEGATIVE_LABEL
        )
        for ex in ds
    )
    return Dataset(
        ds.attribute_names,
        (POSITIVE_LABEL, NEGATIVE_LABEL),
        examples,
        ds.label_name,
    )


def from_arrays(
    features: Sequence[Sequence[float]],
    labels: Sequence[Union[str, int, float]],
    attribute_names: Sequence[str] = (),
    label_name: str = "label",
) -> Dataset:
    """Build a dataset from a feature matrix and labels.

    Integer-valued numeric labels are written as signed tokens (``+1``,
    ``-1``), so ``from_arrays(X, [1, -1])`` yields a dataset that
    :func:`signed_labels` accepts.
    """
    rows = [tuple(float(v) for v in row) for row in features]
    if len(rows) != len(labels):
        raise DataError(
            f"{len(rows)} feature rows but {len(labels)} labels"
        )
    width = len(rows[0]) if rows else len(attribute_names)
    names = tuple(attribute_names) or tuple(f"x{i + 1}" for i in range(width))
    tokens = [_label_token(label) for label in labels]
    examples = tuple(Example(row, token) for row, token in zip(rows, tokens))
    return Dataset(names, tuple(set(tokens)), examples, label_name)


def _label_token(label: Union[str, int, float]) -> str:
    if isinstance(label, str):
        return label
    value = float(label)
    if value == 1.0:
        return POSITIVE_LABEL
    if value == -1.0:
        return NEGATIVE_LABEL
    if value.is_integer():
        return str(int(value))
    return repr(value)
