"""Optimizer step rules: preconditioned NLCG and first-order baselines.

The NLCG iteration keeps a search direction `d` that mixes the current
preconditioned residual with the previous direction through a conjugacy
coefficient beta (Polak-Ribiere or Fletcher-Reeves flavor, clamped to
[0, 1]).  Each step moves along `d` by the scheduled rate times the line
search scale, evaluates one fresh mini-batch at the new point, refreshes
the preconditioner from that gradient, and rebuilds the direction.  One
gradient evaluation per step.

The baselines (SGD, momentum, RMSProp) are plain functional step rules on
the same flat parameter vector so the harness can drive every optimizer
through an identical loop.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from enum import Enum
from typing import Callable

import numpy as np

from .errors import NumericError
from .linesearch import LineSearchConfig, LineSearchState, observe
from .numerics import ParamVector, axpy, dot, hadamard, norm
from .preconditioner import PreconditionerState, identity_inverse, update_and_invert
from .problems import BatchEval, QuadraticProblem

# Restart threshold: when the previous residual energy is this small, the
# conjugacy coefficient resets to zero (pure preconditioned descent).
RESTART_THRESHOLD = 1e-12


class OptimizerKind(str, Enum):
    SGD = "sgd"
    MOMENTUM = "momentum"
    RMSPROP = "rmsprop"
    NLCG_PR = "nlcg_pr"
    NLCG_FR = "nlcg_fr"

    @property
    def is_nlcg(self) -> bool:
        return self in (OptimizerKind.NLCG_PR, OptimizerKind.NLCG_FR)


@dataclass(frozen=True)
class StepMetrics:
    """Per-step observables the harness logs."""

    loss: float
    alpha: float
    lr_scale: float
    beta_raw: float | None
    beta_clamped: float | None
    grad_norm: float


@dataclass(frozen=True)
class NlcgState:
    direction: ParamVector
    precond_residual: ParamVector
    delta_new: float
    delta_old: float
    delta_mid: float
    beta: float
    t: int
    precond: PreconditionerState
    linesearch: LineSearchState
    ls_config: LineSearchConfig
    variant: str  # "pr" | "fr"
    force_beta_zero: bool = False


def nlcg_init(
    weights: ParamVector,
    gradient: ParamVector,
    precond: PreconditionerState,
    ls_config: LineSearchConfig | None = None,
    variant: str = "fr",
    force_beta_zero: bool = False,
) -> NlcgState:
    """Set up the NLCG state from the gradient at the starting point.

    `precond` must be fresh (no updates yet); its first call here returns
    the identity diagonal and records the starting observation.
    """
    if variant not in ("pr", "fr"):
        raise ValueError(f"variant must be 'pr' or 'fr', got {variant!r}")
    if precond.step != 0:
        raise ValueError("nlcg_init needs a preconditioner with no recorded updates")
    if ls_config is None:
        ls_config = LineSearchConfig()
    r = -gradient
    if precond.identity_mode:
        m_inv = identity_inverse(weights.shape[0])
    else:
        m_inv = update_and_invert(precond, weights, gradient)
    s = hadamard(m_inv, r)
    delta_new = dot(r, s)
    return NlcgState(
        direction=s,
        precond_residual=s,
        delta_new=delta_new,
        delta_old=delta_new,
        delta_mid=delta_new,
        beta=0.0,
        t=0,
        precond=precond,
        linesearch=LineSearchState(),
        ls_config=ls_config,
        variant=variant,
        force_beta_zero=force_beta_zero,
    )


def nlcg_step(
    state: NlcgState,
    weights: ParamVector,
    eval_fn: Callable[[ParamVector], BatchEval],
    global_lr: float,
) -> tuple[ParamVector, NlcgState, StepMetrics]:
    """One NLCG iteration.

    Moves along the current direction, evaluates one fresh mini-batch at
    the new point via `eval_fn`, then rebuilds the preconditioned residual,
    conjugacy coefficient, and direction from that single evaluation.
    """
    if not global_lr > 0.0:
        raise ValueError(f"global_lr must be positive, got {global_lr}")
    lr_scale = state.linesearch.scale
    alpha = global_lr * lr_scale

    new_weights = axpy(alpha, state.direction, weights)
    ev = eval_fn(new_weights)
    r = -ev.gradient
    ls_state = observe(state.linesearch, state.ls_config, ev.loss)

    delta_old = state.delta_new
    delta_mid = dot(r, state.precond_residual)

    if state.precond.identity_mode:
        m_inv = identity_inverse(new_weights.shape[0])
    else:
        m_inv = update_and_invert(state.precond, new_weights, ev.gradient)
    s = hadamard(m_inv, r)
    delta_new = dot(r, s)

    if state.force_beta_zero or abs(delta_old) < RESTART_THRESHOLD:
        beta_raw = 0.0
    elif state.variant == "pr":
        beta_raw = (delta_new - delta_mid) / delta_old
    else:
        beta_raw = delta_new / delta_old
    if not np.isfinite(beta_raw):
        raise NumericError(f"conjugacy coefficient became non-finite at step {state.t + 1}")
    beta = min(max(beta_raw, 0.0), 1.0)

    direction = axpy(beta, state.direction, s)
    new_state = replace(
        state,
        direction=direction,
        precond_residual=s,
        delta_new=delta_new,
        delta_old=delta_old,
        delta_mid=delta_mid,
        beta=beta,
        t=state.t + 1,
        linesearch=ls_state,
    )
    metrics = StepMetrics(
        loss=ev.loss,
        alpha=alpha,
        lr_scale=lr_scale,
        beta_raw=beta_raw,
        beta_clamped=beta,
        grad_norm=norm(ev.gradient),
    )
    return new_weights, new_state, metrics


def nlcg_exact_quadratic_step_length(
    problem: QuadraticProblem, r: ParamVector, d: ParamVector
) -> float:
    """Exact minimizing step along `d` for a quadratic: (r.d) / (d.Ad).

    Test-only hook: training runs always use the scheduled rate.
    """
    curvature = dot(d, problem.hessian_product(d))
    if curvature <= 0.0:
        raise NumericError(f"non-positive curvature {curvature:g} along the search direction")
    return dot(r, d) / curvature


@dataclass(frozen=True)
class FirstOrderState:
    """Accumulators and hyperparameters for the SGD-family baselines."""

    velocity: ParamVector
    rms_accumulator: ParamVector
    momentum_coeff: float = 0.9
    rms_decay: float = 0.9
    epsilon: float = 1e-10

    @classmethod
    def initial(
        cls,
        weight_count: int,
        momentum_coeff: float = 0.9,
        rms_decay: float = 0.9,
        epsilon: float = 1e-10,
    ) -> "FirstOrderState":
        if not 0.0 <= momentum_coeff < 1.0:
            raise ValueError(f"momentum_coeff must lie in [0, 1), got {momentum_coeff}")
        if not 0.0 <= rms_decay < 1.0:
            raise ValueError(f"rms_decay must lie in [0, 1), got {rms_decay}")
        if epsilon <= 0.0:
            raise ValueError(f"epsilon must be positive, got {epsilon}")
        return cls(
            velocity=np.zeros(weight_count),
            rms_accumulator=np.zeros(weight_count),
            momentum_coeff=momentum_coeff,
            rms_decay=rms_decay,
            epsilon=epsilon,
        )


def sgd_step(
    state: FirstOrderState, weights: ParamVector, gradient: ParamVector, lr: float
) -> tuple[ParamVector, FirstOrderState]:
    """w <- w - lr * g."""
    if not lr > 0.0:
        raise ValueError(f"lr must be positive, got {lr}")
    return axpy(-lr, gradient, weights), state


def momentum_step(
    state: FirstOrderState, weights: ParamVector, gradient: ParamVector, lr: float
) -> tuple[ParamVector, FirstOrderState]:
    """v <- mu v + g; w <- w - lr * v."""
    if not lr > 0.0:
        raise ValueError(f"lr must be positive, got {lr}")
    velocity = axpy(state.momentum_coeff, state.velocity, gradient)
    return axpy(-lr, velocity, weights), replace(state, velocity=velocity)


def rmsprop_step(
    state: FirstOrderState, weights: ParamVector, gradient: ParamVector, lr: float
) -> tuple[ParamVector, FirstOrderState]:
    """Accumulate squared gradients, momentum over normalized gradients."""
    if not lr > 0.0:
        raise ValueError(f"lr must be positive, got {lr}")
    acc = state.rms_decay * state.rms_accumulator + (1.0 - state.rms_decay) * gradient**2
    velocity = axpy(
        state.momentum_coeff, state.velocity, gradient / np.sqrt(acc + state.epsilon)
    )
    new_weights = axpy(-lr, velocity, weights)
    return new_weights, replace(state, velocity=velocity, rms_accumulator=acc)
