"""Kernel evaluation and maximal-margin classifiers trained on the dual QP."""

import logging
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .config import (
    DEFAULT_BOX_C,
    DEFAULT_MAX_ITER,
    DEFAULT_SV_TOLERANCE,
    DEFAULT_SVM_TOL,
)
from .dataset import Dataset, Example, signed_labels
from .errors import DataError, ModelFormatError

logger = logging.getLogger(__name__)

# Replaces a non-positive curvature along the working pair (duplicate points).
TAU = 1e-12


class KernelKind(str, Enum):
    LINEAR = "linear"
    POLYNOMIAL = "polynomial"
    RBF = "rbf"


@dataclass(frozen=True)
class KernelSpec:
    """A kernel function and its parameter."""

    kind: KernelKind
    degree: int = 1
    gamma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "kind", KernelKind(self.kind))
        if self.kind is KernelKind.POLYNOMIAL and self.degree < 1:
            raise ValueError(f"Polynomial degree must be >= 1, got {self.degree}")
        if self.kind is KernelKind.RBF and not self.gamma > 0:
            raise ValueError(f"RBF gamma must be > 0, got {self.gamma}")

    @classmethod
    def linear(cls) -> "KernelSpec":
        return cls(KernelKind.LINEAR)

    @classmethod
    def polynomial(cls, degree: int) -> "KernelSpec":
        return cls(KernelKind.POLYNOMIAL, degree=degree)

    @classmethod
    def rbf(cls, gamma: float) -> "KernelSpec":
        return cls(KernelKind.RBF, gamma=gamma)

    @classmethod
    def parse(cls, text: str) -> "KernelSpec":
        """Parse the text form produced by ``str(spec)``."""
        parts = text.split()
        try:
            kind = KernelKind(parts[0])
            if kind is KernelKind.LINEAR and len(parts) == 1:
                return cls.linear()
            if kind is KernelKind.POLYNOMIAL and len(parts) == 2:
                return cls.polynomial(int(parts[1]))
            if kind is KernelKind.RBF and len(parts) == 2:
                return cls.rbf(float(parts[1]))
        except (IndexError, ValueError) as e:
            raise ModelFormatError(f"Invalid kernel spec {text!r}: {e}") from None
        raise ModelFormatError(f"Invalid kernel spec {text!r}")

    def __str__(self) -> str:
        if self.kind is KernelKind.POLYNOMIAL:
            return f"polynomial {self.degree}"
        if self.kind is KernelKind.RBF:
            return f"rbf {self.gamma!r}"
        return "linear"


def gram_matrix(
    k: KernelSpec, X: np.ndarray, Y: Optional[np.ndarray] = None
) -> np.ndarray:
    """Evaluate ``k`` between every row of ``X`` and every row of ``Y``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    Y = X if Y is None else np.atleast_2d(np.asarray(Y, dtype=float))
    if X.shape[1] != Y.shape[1]:
        raise DataError(f"Dimension mismatch: {X.shape[1]} vs {Y.shape[1]}")

    if k.kind is KernelKind.RBF:
        diff = X[:, None, :] - Y[None, :, :]
        return np.exp(-k.gamma * np.sum(diff * diff, axis=-1))

    dot = X @ Y.T
    if k.kind is KernelKind.POLYNOMIAL:
        return (dot + 1.0) ** k.degree
    return dot


def kernel_eval(k: KernelSpec, x: Sequence[float], y: Sequence[float]) -> float:
    """Evaluate ``k(x, y)`` for two feature vectors of equal length."""
    if len(x) != len(y):
        raise DataError(f"Dimension mismatch: {len(x)} vs {len(y)}")
    return float(gram_matrix(k, np.array([x], float), np.array([y], float))[0, 0])


@dataclass(frozen=True, eq=False)
class SvmModel:
    """A trained binary classifier in dual form.

    ``training_examples`` keeps every training point (labels +1/-1) next to
    its multiplier, so support-vector membership can be read off directly.
    """

    alphas: np.ndarray
    bias: float
    kernel: KernelSpec
    training_examples: Dataset
    sv_tolerance: float = DEFAULT_SV_TOLERANCE
    box_c: float = DEFAULT_BOX_C

    def __post_init__(self):
        alphas = np.asarray(self.alphas, dtype=float)
        object.__setattr__(self, "alphas", alphas)
        if alphas.shape != (len(self.training_examples),):
            raise DataError(
                f"Expected {len(self.training_examples)} multipliers, "
                f"got {alphas.shape[0]}"
            )
        if not self.sv_tolerance > 0 or not self.box_c > 0:
            raise ValueError("sv_tolerance and box_c must be positive")

    @property
    def labels(self) -> np.ndarray:
        return signed_labels(self.training_examples)

    @property
    def support_indices(self) -> list[int]:
        return [int(i) for i in np.flatnonzero(self.alphas > self.sv_tolerance)]

    @property
    def n_support(self) -> int:
        return len(self.support_indices)

    @property
    def dimension(self) -> int:
        return self.training_examples.n_attributes


def _select_pair(
    alphas: np.ndarray, y: np.ndarray, grad: np.ndarray, box_c: float
) -> tuple[int, int, float]:
    """Pick the maximal violating pair; returns ``(i, j, gap)``."""
    score = -y * grad
    up = ((y > 0) & (alphas < box_c)) | ((y < 0) & (alphas > 0))
    low = ((y < 0) & (alphas < box_c)) | ((y > 0) & (alphas > 0))
    if not up.any() or not low.any():
        return -1, -1, 0.0
    i = int(np.argmax(np.where(up, score, -np.inf)))
    j = int(np.argmin(np.where(low, score, np.inf)))
    return i, j, float(score[i] - score[j])


def _solve_dual(
    Q: np.ndarray,
    y: np.ndarray,
    box_c: float,
    tol: float,
    max_iter: int,
) -> tuple[np.ndarray, np.ndarray, int]:
    """Minimise ``1/2 a'Qa - e'a`` subject to ``0 <= a <= C``, ``y'a = 0``.

    Two multipliers move per iteration along the equality constraint; the
    step is the unconstrained optimum clipped to the box.
    """
    n = len(y)
    alphas = np.zeros(n)
    grad = -np.ones(n)

    for iteration in range(max_iter):
        i, j, gap = _select_pair(alphas, y, grad, box_c)
        if i < 0 or gap < tol:
            return alphas, grad, iteration

        old_i, old_j = alphas[i], alphas[j]
        if y[i] != y[j]:
            quad = Q[i, i] + Q[j, j] + 2.0 * Q[i, j]
            delta = (-grad[i] - grad[j]) / max(quad, TAU)
            diff = old_i - old_j
            a_i, a_j = old_i + delta, old_j + delta
            if diff > 0:
                if a_j < 0:
                    a_j, a_i = 0.0, diff
            elif a_i < 0:
                a_i, a_j = 0.0, -diff
            if diff > 0:
                if a_i > box_c:
                    a_i, a_j = box_c, box_c - diff
            elif a_j > box_c:
                a_j, a_i = box_c, box_c + diff
        else:
            quad = Q[i, i] + Q[j, j] - 2.0 * Q[i, j]
            delta = (grad[i] - grad[j]) / max(quad, TAU)
            total = old_i + old_j
            a_i, a_j = old_i - delta, old_j + delta
            if total > box_c:
                if a_i > box_c:
                    a_i, a_j = box_c, total - box_c
            elif a_j < 0:
                a_j, a_i = 0.0, total
            if total > box_c:
                if a_j > box_c:
                    a_j, a_i = box_c, total - box_c
            elif a_i < 0:
                a_i, a_j = 0.0, total

        alphas[i], alphas[j] = a_i, a_j
        grad += Q[:, i] * (a_i - old_i) + Q[:, j] * (a_j - old_j)

    logger.warning("SVM solver stopped at the iteration cap (%d)", max_iter)
    return alphas, grad, max_iter


def _compute_bias(
    alphas: np.ndarray, y: np.ndarray, grad: np.ndarray, box_c: float
) -> float:
    # -y_i * grad_i = y_i - sum_m alpha_m y_m K(x_m, x_i)
    target = -y * grad
    free = (alphas > 0) & (alphas < box_c)
    if free.any():
        return float(np.mean(target[free]))

    # No free multiplier: the bias is only bounded by the KKT conditions.
    at_zero, at_c = alphas <= 0, alphas >= box_c
    lower = ((y > 0) & at_zero) | ((y < 0) & at_c)
    upper = ((y < 0) & at_zero) | ((y > 0) & at_c)
    lo = float(np.max(target[lower])) if lower.any() else None
    hi = float(np.min(target[upper])) if upper.any() else None
    if lo is not None and hi is not None:
        return (lo + hi) / 2.0
    if lo is not None:
        return lo
    if hi is not None:
        return hi
    return 0.0


def train(
    ds: Dataset,
    k: KernelSpec,
    box_c: float = DEFAULT_BOX_C,
    tol: float = DEFAULT_SVM_TOL,
    sv_tolerance: float = DEFAULT_SV_TOLERANCE,
    max_iter: int = DEFAULT_MAX_ITER,
) -> SvmModel:
    """Train a soft-margin SVM by solving the dual quadratic program.

    Maximises ``sum a_i - 1/2 sum_ij a_i a_j c_i c_j K(x_i, x_j)`` subject to
    ``0 <= a_i <= box_c`` and ``sum a_i c_i = 0`` until the KKT gap falls
    below ``tol``. The result is deterministic for a given input order.

    Args:
        ds: Training set with labels +1/-1
        k: Kernel
        box_c: Upper bound on every multiplier; large values give a hard margin
        tol: KKT gap at which the solver stops
        sv_tolerance: Multipliers above this value mark support vectors
        max_iter: Iteration cap

    Returns:
        Trained SvmModel

    Raises:
        DataError: If labels are not +1/-1 or only one class is present
    """
    if not box_c > 0:
        raise ValueError(f"box_c must be positive, got {box_c}")
    if not tol > 0:
        raise ValueError(f"tol must be positive, got {tol}")

    y = signed_labels(ds)
    if not ((y > 0).any() and (y < 0).any()):
        raise DataError("need two classes to train an SVM")

    X = ds.features_matrix()
    Q = (y[:, None] * y[None, :]) * gram_matrix(k, X)
    alphas, grad, iterations = _solve_dual(Q, y, box_c, tol, max_iter)
    bias = _compute_bias(alphas, y, grad, box_c)

    logger.debug(
        "SVM trained: %d examples, %d iterations, %d support vectors",
        len(ds),
        iterations,
        int(np.sum(alphas > sv_tolerance)),
    )
    return SvmModel(alphas, bias, k, ds, sv_tolerance, box_c)


def _check_dimension(m: SvmModel, x: Sequence[float]) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (m.dimension,):
        raise DataError(
            f"Dimension mismatch: model expects {m.dimension}, got {x.shape[-1]}"
        )
    return x


def decision_values(m: SvmModel, X: np.ndarray) -> np.ndarray:
    """Vectorised :func:`decision_value` over the rows of ``X``."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if X.shape[1] != m.dimension:
        raise DataError(
            f"Dimension mismatch: model expects {m.dimension}, got {X.shape[1]}"
        )
    weights = m.alphas * m.labels
    K = gram_matrix(m.kernel, m.training_examples.features_matrix(), X)
    return weights @ K + m.bias


def decision_value(m: SvmModel, x: Sequence[float]) -> float:
    """Return ``f(x) = sum_i a_i c_i K(x_i, x) + b``."""
    return float(decision_values(m, _check_dimension(m, x)[None, :])[0])


def predict(m: SvmModel, x: Sequence[float]) -> int:
    """Classify ``x`` as +1 or -1; a decision value of exactly zero gives +1."""
    return 1 if decision_value(m, x) >= 0.0 else -1


def loo_bound(m: SvmModel) -> float:
    """Return ``#SV / l``, the observable estimate of the leave-one-out bound."""
    n = len(m.training_examples)
    n_support = m.n_support
    if n_support == 0:
        logger.warning(
            "No multiplier exceeds sv_tolerance=%g; support-vector set is empty",
            m.sv_tolerance,
        )
    return n_support / n if n else 0.0


def dual_objective(m: SvmModel) -> float:
    """Value of ``sum a_i - 1/2 sum_ij a_i a_j c_i c_j K(x_i, x_j)``."""
    w = m.alphas * m.labels
    K = gram_matrix(m.kernel, m.training_examples.features_matrix())
    return float(np.sum(m.alphas) - 0.5 * w @ K @ w)


def kkt_residual(m: SvmModel) -> float:
    """Largest violation of the KKT conditions over the training set.

    Multipliers within ``sv_tolerance`` of a bound count as sitting on it.
    """
    margins = m.labels * decision_values(m, m.training_examples.features_matrix())
    at_zero = m.alphas <= m.sv_tolerance
    at_c = m.alphas >= m.box_c - m.sv_tolerance
    free = ~at_zero & ~at_c
    violation = np.zeros_like(margins)
    violation[at_zero] = np.maximum(0.0, 1.0 - margins[at_zero])
    violation[at_c] = np.maximum(0.0, margins[at_c] - 1.0)
    violation[free] = np.abs(margins[free] - 1.0)
    return float(np.max(violation)) if len(violation) else 0.0


def save_model(m: SvmModel, path: Union[str, Path]) -> None:
    """Write ``m`` in the line-oriented model format (floats via ``repr``)."""
    ds = m.training_examples
    lines = [
        f"kernel {m.kernel}",
        f"params box_c={m.box_c!r} sv_tolerance={m.sv_tolerance!r} bias={m.bias!r}",
        f"attributes {','.join(ds.attribute_names)}",
    ]
    for alpha, example in zip(m.alphas, ds):
        features = ",".join(repr(v) for v in example.features)
        lines.append(f"{example.label}\t{float(alpha)!r}\t{features}")

    with open(path, "w", newline="\n") as f:
        f.write("\n".join(lines) + "\n")


def _expect_prefix(line: str, prefix: str, lineno: int) -> str:
    if not line.startswith(prefix + " "):
        raise ModelFormatError(f"Line {lineno}: expected '{prefix} ...'")
    return line[len(prefix) + 1 :]


def load_model(path: Union[str, Path]) -> SvmModel:
    """Read a model written by :func:`save_model`.

    Raises:
        ModelFormatError: If the file does not follow the model format
    """
    with open(path, "r") as f:
        lines = f.read().splitlines()
    if len(lines) < 3:
        raise ModelFormatError(f"Truncated model file: {path}")

    kernel = KernelSpec.parse(_expect_prefix(lines[0], "kernel", 1))
    try:
        params = dict(
            item.split("=", 1) for item in _expect_prefix(lines[1], "params", 2).split()
        )
        box_c = float(params["box_c"])
        sv_tolerance = float(params["sv_tolerance"])
        bias = float(params["bias"])
    except (KeyError, ValueError) as e:
        raise ModelFormatError(f"Line 2: invalid params: {e}") from None

    attributes_text = _expect_prefix(lines[2] + " ", "attributes", 3).strip()
    attribute_names = tuple(attributes_text.split(",")) if attributes_text else ()

    alphas, examples = [], []
    for lineno, line in enumerate(lines[3:], start=4):
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 3:
            raise ModelFormatError(f"Line {lineno}: expected label, alpha, features")
        try:
            alpha = float(fields[1])
            features = tuple(float(v) for v in fields[2].split(",")) if fields[2] else ()
        except ValueError as e:
            raise ModelFormatError(f"Line {lineno}: {e}") from None
        alphas.append(alpha)
        examples.append(Example(features, fields[0]))

    ds = Dataset(
        attribute_names, tuple({ex.label for ex in examples}), tuple(examples)
    )
    return SvmModel(np.array(alphas), bias, kernel, ds, sv_tolerance, box_c)
