"""Diagonal quasi-Newton preconditioner.

Maintains a per-parameter curvature estimate `h_diag` from successive
(weights, gradient) pairs using the diagonal of the BFGS Hessian update:

    h_i += y_i^2 / (y.s) - (h_i s_i)^2 / (s.(h*s))

with y the gradient difference and s the weight difference.  The inverse
diagonal 1/max(h_i, floor) is what the optimizer multiplies residuals by.
Updates are skipped (estimate left untouched) when the curvature pair is
degenerate or indicates negative curvature, which keeps the diagonal
positive; the floor guards the inversion regardless.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatchError, NumericError, UnsupportedOperationError
from .numerics import ParamVector


@dataclass
class PreconditionerState:
    h_diag: np.ndarray
    w_old: np.ndarray | None = None
    grad_old: np.ndarray | None = None
    step: int = 0
    curvature_floor: float = 1e-8
    skip_tolerance: float = 1e-12
    identity_mode: bool = False

    def __post_init__(self):
        if self.curvature_floor <= 0.0:
            raise ValueError(f"curvature_floor must be positive, got {self.curvature_floor}")
        if self.skip_tolerance <= 0.0:
            raise ValueError(f"skip_tolerance must be positive, got {self.skip_tolerance}")

    @classmethod
    def initial(
        cls,
        weight_count: int,
        curvature_floor: float = 1e-8,
        skip_tolerance: float = 1e-12,
        identity_mode: bool = False,
    ) -> "PreconditionerState":
        return cls(
            h_diag=np.ones(weight_count),
            curvature_floor=curvature_floor,
            skip_tolerance=skip_tolerance,
            identity_mode=identity_mode,
        )


def identity_inverse(weight_count: int) -> ParamVector:
    """The do-nothing preconditioner: an all-ones inverse diagonal."""
    return np.ones(weight_count)


def update_and_invert(
    state: PreconditionerState, weights: ParamVector, gradient: ParamVector
) -> ParamVector:
    """Fold one (weights, gradient) observation in; return the inverse diagonal.

    The first call only records its observation and returns the identity
    diagonal.  Later calls apply the diagonal update from the differences
    against the recorded pair, skipping degenerate or negative-curvature
    pairs.  `state` is mutated in place; the returned vector is fresh.
    """
    if state.identity_mode:
        raise UnsupportedOperationError(
            "preconditioner is in identity mode; use identity_inverse instead"
        )
    if weights.shape != state.h_diag.shape or gradient.shape != state.h_diag.shape:
        raise DimensionMismatchError(
            f"weights {weights.shape} / gradient {gradient.shape} do not match "
            f"preconditioner of size {state.h_diag.shape}"
        )

    if state.step > 0:
        y = gradient - state.grad_old
        s = weights - state.w_old
        ys = float(y @ s)
        hs = state.h_diag * s
        shs = float(hs @ s)
        # Degenerate or negative-curvature pairs leave the estimate alone.
        if ys >= state.skip_tolerance and abs(shs) >= state.skip_tolerance:
            h_new = state.h_diag + y * y / ys - hs * hs / shs
            if not np.all(np.isfinite(h_new)):
                raise NumericError(
                    f"preconditioner update produced non-finite entries at step {state.step}"
                )
            state.h_diag = h_new

    state.w_old = weights.copy()
    state.grad_old = gradient.copy()
    state.step += 1
    return 1.0 / np.maximum(state.h_diag, state.curvature_floor)
