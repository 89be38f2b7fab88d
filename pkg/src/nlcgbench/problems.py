"""Differentiable training problems.

Three problem families share one interface: a synthetic quadratic with a
known minimizer, multinomial logistic regression, and a small
fully-connected network with tanh hidden layers and a softmax
cross-entropy head.  Losses and gradients are always means over the
evaluated batch, so evaluations over different batch sizes compose by
size-weighted averaging.

All parameters live in one flat float vector (see `numerics`); each
problem defines the packing order of that vector and evaluates loss and
gradient with plain numpy.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    DatasetFormatError,
    DimensionMismatchError,
    NumericError,
    UnsupportedOperationError,
)
from .numerics import ParamVector


@dataclass(frozen=True)
class Dataset:
    """An in-memory supervised dataset: row-major features, integer labels."""

    features: np.ndarray
    labels: np.ndarray
    name: str = "dataset"

    def __post_init__(self):
        if self.features.ndim != 2:
            raise DimensionMismatchError(
                f"features must be 2-D (samples x features), got {self.features.shape}"
            )
        if self.labels.shape != (self.features.shape[0],):
            raise DimensionMismatchError(
                f"labels shape {self.labels.shape} does not match "
                f"{self.features.shape[0]} samples"
            )
        if self.features.shape[0] < 1:
            raise ValueError("dataset needs at least one sample")
        if self.labels.size and self.labels.min() < 0:
            raise ValueError("labels must be non-negative class ids")
        if not np.all(np.isfinite(self.features)):
            raise NumericError("dataset features contain non-finite values")

    @property
    def num_samples(self) -> int:
        return self.features.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.features.shape[1]

    @property
    def num_classes(self) -> int:
        return int(self.labels.max()) + 1


@dataclass(frozen=True)
class BatchEval:
    """Result of one batch evaluation: mean loss and mean gradient."""

    loss: float
    gradient: ParamVector


def _check_eval(loss: float, gradient: np.ndarray, context: str) -> BatchEval:
    if not np.isfinite(loss) or not np.all(np.isfinite(gradient)):
        raise NumericError(f"non-finite loss or gradient in {context}")
    return BatchEval(loss=float(loss), gradient=gradient)


class Problem:
    """Common interface: a flat weight vector in, mean loss and gradient out."""

    kind: str = "abstract"

    @property
    def weight_count(self) -> int:
        raise NotImplementedError

    def initial_weights(self, seed: int) -> ParamVector:
        raise NotImplementedError

    def evaluate(self, weights: ParamVector, batch_indices: np.ndarray) -> BatchEval:
        raise NotImplementedError

    def _check_weights(self, weights: ParamVector) -> None:
        if weights.ndim != 1 or weights.shape[0] != self.weight_count:
            raise DimensionMismatchError(
                f"{self.kind} expects {self.weight_count} weights, "
                f"got shape {weights.shape}"
            )


class QuadraticProblem(Problem):
    """f(w) = 0.5 w^T A w - b^T w with A symmetric positive definite.

    The objective is deterministic: batch indices are ignored.  The exact
    minimizer A^-1 b and exact Hessian-vector products are available for
    oracle checks.
    """

    kind = "quadratic"

    def __init__(self, matrix: np.ndarray, rhs: np.ndarray, dtype=np.float64):
        matrix = np.asarray(matrix, dtype=dtype)
        rhs = np.asarray(rhs, dtype=dtype)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise DimensionMismatchError(f"matrix must be square, got {matrix.shape}")
        if rhs.shape != (matrix.shape[0],):
            raise DimensionMismatchError(
                f"rhs shape {rhs.shape} does not match matrix {matrix.shape}"
            )
        if not np.allclose(matrix, matrix.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(matrix).max())):
            raise ValueError("matrix must be symmetric")
        try:
            np.linalg.cholesky(matrix)
        except np.linalg.LinAlgError as exc:
            raise ValueError("matrix must be positive definite") from exc
        self.matrix = matrix
        self.rhs = rhs
        self.dtype = dtype

    @property
    def weight_count(self) -> int:
        return self.rhs.shape[0]

    def initial_weights(self, seed: int) -> ParamVector:
        rng = np.random.default_rng(seed)
        return rng.standard_normal(self.weight_count).astype(self.dtype)

    def optimum(self) -> ParamVector:
        """Exact minimizer A^-1 b."""
        return np.linalg.solve(self.matrix, self.rhs)

    def hessian_product(self, v: ParamVector) -> ParamVector:
        """Exact Hessian-vector product A v."""
        if v.shape != (self.weight_count,):
            raise DimensionMismatchError(f"vector shape {v.shape} incompatible with {self.matrix.shape}")
        return self.matrix @ v

    def evaluate(self, weights: ParamVector, batch_indices=None) -> BatchEval:
        self._check_weights(weights)
        with np.errstate(over="ignore", invalid="ignore"):
            aw = self.matrix @ weights
            loss = 0.5 * float(weights @ aw) - float(self.rhs @ weights)
        return _check_eval(loss, aw - self.rhs, "quadratic evaluation")


class _SoftmaxNetProblem(Problem):
    """Shared machinery for softmax + cross-entropy classifiers.

    Logistic regression is the zero-hidden-layer case; the MLP adds tanh
    hidden layers.  Weights are packed layer by layer as (matrix, bias)
    pairs, matrices in row-major order.
    """

    def __init__(self, dataset: Dataset, hidden_sizes: tuple[int, ...], num_classes: int | None = None, dtype=np.float64):
        for h in hidden_sizes:
            if h < 1:
                raise ValueError(f"hidden layer sizes must be >= 1, got {hidden_sizes}")
        self.dataset = dataset
        self.dtype = dtype
        self.num_classes = dataset.num_classes if num_classes is None else int(num_classes)
        if self.num_classes < 2:
            raise ValueError(f"need at least 2 classes, got {self.num_classes}")
        if int(dataset.labels.max()) >= self.num_classes:
            raise ValueError("dataset labels exceed the declared class count")
        self.layer_sizes = (dataset.feature_dim, *hidden_sizes, self.num_classes)
        self._features = dataset.features.astype(dtype, copy=False)
        self._labels = dataset.labels.astype(np.int64, copy=False)

    @property
    def weight_count(self) -> int:
        sizes = self.layer_sizes
        return sum(sizes[i] * sizes[i + 1] + sizes[i + 1] for i in range(len(sizes) - 1))

    def initial_weights(self, seed: int) -> ParamVector:
        """Uniform matrix entries in +-sqrt(6 / (fan_in + fan_out)); zero biases."""
        rng = np.random.default_rng(seed)
        parts = []
        sizes = self.layer_sizes
        for i in range(len(sizes) - 1):
            fan_in, fan_out = sizes[i], sizes[i + 1]
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            parts.append(rng.uniform(-limit, limit, size=fan_in * fan_out))
            parts.append(np.zeros(fan_out))
        return np.concatenate(parts).astype(self.dtype)

    def _unpack(self, weights: ParamVector) -> list[tuple[np.ndarray, np.ndarray]]:
        layers = []
        sizes = self.layer_sizes
        offset = 0
        for i in range(len(sizes) - 1):
            fan_in, fan_out = sizes[i], sizes[i + 1]
            w = weights[offset : offset + fan_in * fan_out].reshape(fan_in, fan_out)
            offset += fan_in * fan_out
            b = weights[offset : offset + fan_out]
            offset += fan_out
            layers.append((w, b))
        return layers

    def _take_batch(self, batch_indices) -> tuple[np.ndarray, np.ndarray]:
        idx = np.asarray(batch_indices, dtype=np.int64)
        if idx.ndim != 1 or idx.size == 0:
            raise DimensionMismatchError("batch_indices must be a non-empty 1-D index array")
        if idx.min() < 0 or idx.max() >= self.dataset.num_samples:
            raise IndexError(
                f"batch indices out of range for dataset of {self.dataset.num_samples} samples"
            )
        return self._features[idx], self._labels[idx]

    def logits(self, weights: ParamVector, features: np.ndarray) -> np.ndarray:
        """Forward pass to raw class scores; no softmax applied."""
        self._check_weights(weights)
        layers = self._unpack(weights)
        h = features.astype(self.dtype, copy=False)
        for w, b in layers[:-1]:
            h = np.tanh(h @ w + b)
        w_out, b_out = layers[-1]
        return h @ w_out + b_out

    def evaluate(self, weights: ParamVector, batch_indices) -> BatchEval:
        self._check_weights(weights)
        x, labels = self._take_batch(batch_indices)
        layers = self._unpack(weights)
        n = x.shape[0]

        # forward, keeping hidden activations for the backward pass
        activations = [x.astype(self.dtype, copy=False)]
        h = activations[0]
        for w, b in layers[:-1]:
            h = np.tanh(h @ w + b)
            activations.append(h)
        w_out, b_out = layers[-1]
        logits = h @ w_out + b_out

        # mean cross-entropy with a stabilized log-sum-exp
        shifted = logits - logits.max(axis=1, keepdims=True)
        log_norm = np.log(np.exp(shifted).sum(axis=1))
        loss = float(np.mean(log_norm - shifted[np.arange(n), labels]))

        # backward
        probs = np.exp(shifted)
        probs /= probs.sum(axis=1, keepdims=True)
        delta = probs
        delta[np.arange(n), labels] -= 1.0
        delta /= n

        grads = [None] * len(layers)
        for i in range(len(layers) - 1, -1, -1):
            a_prev = activations[i]
            grads[i] = (a_prev.T @ delta, delta.sum(axis=0))
            if i > 0:
                delta = (delta @ layers[i][0].T) * (1.0 - activations[i] ** 2)

        flat = np.concatenate([np.concatenate((gw.ravel(), gb)) for gw, gb in grads])
        return _check_eval(loss, flat.astype(self.dtype, copy=False), f"{self.kind} evaluation")


class LogisticRegressionProblem(_SoftmaxNetProblem):
    """Multinomial logistic regression: a linear softmax classifier."""

    kind = "logistic_regression"

    def __init__(self, dataset: Dataset, num_classes: int | None = None, dtype=np.float64):
        super().__init__(dataset, hidden_sizes=(), num_classes=num_classes, dtype=dtype)


class MlpProblem(_SoftmaxNetProblem):
    """Fully-connected network, tanh hidden layers, softmax cross-entropy head."""

    kind = "mlp"

    def __init__(self, dataset: Dataset, hidden_sizes: tuple[int, ...], num_classes: int | None = None, dtype=np.float64):
        if len(hidden_sizes) < 1:
            raise ValueError("an MLP needs at least one hidden layer; use logistic regression otherwise")
        super().__init__(dataset, hidden_sizes=tuple(hidden_sizes), num_classes=num_classes, dtype=dtype)


def evaluate(problem: Problem, weights: ParamVector, batch_indices) -> BatchEval:
    """Mean loss and gradient of `problem` at `weights` over the given batch."""
    return problem.evaluate(weights, batch_indices)


def accuracy(problem: Problem, weights: ParamVector, dataset: Dataset) -> float:
    """Fraction of `dataset` classified correctly by argmax score.

    Ties resolve toward the lowest class id.  Only classification problems
    support this.
    """
    if not isinstance(problem, _SoftmaxNetProblem):
        raise UnsupportedOperationError(f"accuracy is undefined for problem kind '{problem.kind}'")
    if dataset.feature_dim != problem.dataset.feature_dim:
        raise DimensionMismatchError(
            f"dataset feature dim {dataset.feature_dim} does not match problem "
            f"feature dim {problem.dataset.feature_dim}"
        )
    scores = problem.logits(weights, dataset.features)
    predictions = np.argmax(scores, axis=1)  # first max wins -> lowest class id
    return float(np.mean(predictions == dataset.labels))


def make_quadratic(
    n: int,
    condition_number: float,
    seed: int,
    diagonal: bool = False,
    min_eigenvalue: float = 1.0,
    dtype=np.float64,
) -> QuadraticProblem:
    """Random SPD quadratic with the requested eigenvalue spread.

    Eigenvalues are geometrically spaced over
    [min_eigenvalue, min_eigenvalue * condition_number], so the spectral
    condition number equals `condition_number` exactly.  With
    `diagonal=True` the Hessian is diagonal with the eigenvalues in a
    seed-determined random order.
    """
    if n < 1:
        raise ValueError(f"dimension must be >= 1, got {n}")
    if condition_number < 1.0:
        raise ValueError(f"condition number must be >= 1, got {condition_number}")
    if n == 1 and condition_number != 1.0:
        raise ValueError("a 1-D quadratic cannot realize a condition number above 1")
    if min_eigenvalue <= 0.0:
        raise ValueError(f"min_eigenvalue must be positive, got {min_eigenvalue}")
    rng = np.random.default_rng(seed)
    if n == 1:
        eigs = np.array([min_eigenvalue])
    else:
        eigs = np.geomspace(min_eigenvalue, min_eigenvalue * condition_number, n)
    if diagonal:
        a = np.diag(rng.permutation(eigs))
    else:
        q, _ = np.linalg.qr(rng.standard_normal((n, n)))
        a = (q * eigs) @ q.T
        a = 0.5 * (a + a.T)
    b = rng.standard_normal(n)
    return QuadraticProblem(a, b, dtype=dtype)


def make_synthetic_classification(
    num_samples: int,
    feature_dim: int,
    num_classes: int,
    separation: float,
    seed: int,
    dtype=np.float64,
) -> Dataset:
    """Gaussian class clusters with controllable overlap.

    Class means sit at `separation` times random unit directions; samples
    add unit-variance isotropic noise.  Class counts are balanced up to
    rounding and the sample order is shuffled.  Everything is a pure
    function of the arguments.
    """
    if num_samples < 1 or feature_dim < 1 or num_classes < 2:
        raise ValueError("need num_samples >= 1, feature_dim >= 1, num_classes >= 2")
    if separation < 0.0:
        raise ValueError(f"separation must be >= 0, got {separation}")
    rng = np.random.default_rng(seed)
    directions = rng.standard_normal((num_classes, feature_dim))
    norms = np.linalg.norm(directions, axis=1, keepdims=True)
    norms[norms == 0.0] = 1.0
    means = separation * directions / norms

    base, extra = divmod(num_samples, num_classes)
    counts = [base + (1 if c < extra else 0) for c in range(num_classes)]
    features = np.empty((num_samples, feature_dim))
    labels = np.empty(num_samples, dtype=np.int64)
    row = 0
    for c, count in enumerate(counts):
        features[row : row + count] = means[c] + rng.standard_normal((count, feature_dim))
        labels[row : row + count] = c
        row += count

    order = rng.permutation(num_samples)
    return Dataset(
        features=features[order].astype(dtype),
        labels=labels[order],
        name=f"synthetic-{num_samples}x{feature_dim}-c{num_classes}-s{separation:g}-seed{seed}",
    )


def load_csv_dataset(path: str, label_column: str, dtype=np.float64) -> Dataset:
    """Load a headered CSV into a Dataset.

    The named column supplies labels; every other column must parse as a
    finite float.  Label values are mapped to dense ids in order of first
    occurrence.  Malformed rows are reported with their 1-based line
    number.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DatasetFormatError(f"{path}: empty file, expected a header row") from None
        header = [h.strip() for h in header]
        if label_column not in header:
            raise DatasetFormatError(f"{path}: no column named '{label_column}' in header {header}")
        label_idx = header.index(label_column)
        feature_columns = [i for i in range(len(header)) if i != label_idx]

        rows: list[list[float]] = []
        raw_labels: list[str] = []
        for line_no, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise DatasetFormatError(
                    f"{path}: line {line_no}: expected {len(header)} fields, got {len(row)}"
                )
            values = []
            for i in feature_columns:
                cell = row[i].strip()
                try:
                    value = float(cell)
                except ValueError:
                    raise DatasetFormatError(
                        f"{path}: line {line_no}: non-numeric value '{cell}' "
                        f"in column '{header[i]}'"
                    ) from None
                if not np.isfinite(value):
                    raise DatasetFormatError(
                        f"{path}: line {line_no}: non-finite value '{cell}' "
                        f"in column '{header[i]}'"
                    )
                values.append(value)
            rows.append(values)
            raw_labels.append(row[label_idx].strip())

    if not rows:
        raise DatasetFormatError(f"{path}: no samples")

    label_ids: dict[str, int] = {}
    labels = np.empty(len(raw_labels), dtype=np.int64)
    for i, raw in enumerate(raw_labels):
        if raw not in label_ids:
            label_ids[raw] = len(label_ids)
        labels[i] = label_ids[raw]

    return Dataset(
        features=np.asarray(rows, dtype=dtype),
        labels=labels,
        name=os.path.splitext(os.path.basename(path))[0],
    )
