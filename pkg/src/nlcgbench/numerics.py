"""Flat parameter-vector arithmetic.

Every optimizer in this library works on a single 1-D float array holding
all trainable parameters concatenated in a fixed order.  The helpers here
are thin wrappers over numpy that add the two guarantees the optimizers
rely on: shapes always agree, and non-finite values surface as errors at
the operation boundary instead of propagating silently.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionMismatchError, NumericError

ParamVector = np.ndarray


def as_vector(values, dtype=np.float64) -> ParamVector:
    """Build a validated 1-D parameter vector from any array-like."""
    v = np.asarray(values, dtype=dtype)
    if v.ndim != 1:
        raise DimensionMismatchError(f"expected a 1-D vector, got shape {v.shape}")
    if not np.all(np.isfinite(v)):
        raise NumericError("vector contains non-finite entries")
    return v


def _check_same_length(a: ParamVector, b: ParamVector) -> None:
    if a.shape != b.shape:
        raise DimensionMismatchError(f"length mismatch: {a.shape} vs {b.shape}")


def dot(a: ParamVector, b: ParamVector) -> float:
    """Inner product a . b as a python float."""
    _check_same_length(a, b)
    out = float(np.dot(a, b))
    if not np.isfinite(out):
        raise NumericError("dot product overflowed or produced a non-finite value")
    return out


def norm(v: ParamVector) -> float:
    """Euclidean norm, via the same reduction `dot` uses."""
    return float(np.sqrt(dot(v, v)))


def axpy(alpha: float, x: ParamVector, y: ParamVector) -> ParamVector:
    """Return alpha * x + y without modifying the inputs."""
    _check_same_length(x, y)
    with np.errstate(over="ignore", invalid="ignore"):
        out = alpha * x + y
    if not np.all(np.isfinite(out)):
        raise NumericError("axpy produced non-finite entries")
    return out


def hadamard(a: ParamVector, b: ParamVector) -> ParamVector:
    """Elementwise product a * b."""
    _check_same_length(a, b)
    out = a * b
    if not np.all(np.isfinite(out)):
        raise NumericError("elementwise product produced non-finite entries")
    return out


def reciprocal_clamped(a: ParamVector, floor: float) -> ParamVector:
    """Elementwise 1 / max(a_i, floor).

    `floor` must be positive, which also makes the result finite and
    positive regardless of the sign of the entries of `a`.
    """
    if not floor > 0.0:
        raise ValueError(f"floor must be positive, got {floor}")
    return 1.0 / np.maximum(a, floor)
