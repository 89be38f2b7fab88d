"""Online stochastic step-length controller.

Instead of probing multiple candidate points per iteration, the controller
watches the training loss from step to step and nudges a multiplicative
scale on the global learning rate: shrink after a clear increase, recover
after a clearly flat-or-better step, hold inside the dead band between the
two thresholds.  The scale never exceeds 1 and never reaches 0.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, NumericError


@dataclass(frozen=True)
class LineSearchConfig:
    increase_threshold: float = 0.02
    flat_threshold: float = 0.01
    decrease_factor: float = 0.025
    increase_factor: float = 0.025
    enabled: bool = True

    def __post_init__(self):
        if not 0.0 <= self.flat_threshold <= self.increase_threshold:
            raise ConfigError(
                f"need 0 <= flat_threshold <= increase_threshold, got "
                f"{self.flat_threshold} vs {self.increase_threshold}"
            )
        if not 0.0 < self.decrease_factor < 1.0:
            raise ConfigError(f"decrease_factor must lie in (0, 1), got {self.decrease_factor}")
        if not 0.0 < self.increase_factor < 1.0:
            raise ConfigError(f"increase_factor must lie in (0, 1), got {self.increase_factor}")


@dataclass(frozen=True)
class LineSearchState:
    scale: float = 1.0
    previous_loss: float | None = None


def observe(state: LineSearchState, config: LineSearchConfig, loss: float) -> LineSearchState:
    """Fold one post-step training loss into the controller.

    Returns the successor state; the input state is not modified.  With the
    controller disabled the state passes through untouched.
    """
    if not config.enabled:
        return state
    if not np.isfinite(loss):
        raise NumericError(f"line search observed a non-finite loss: {loss}")
    if state.previous_loss is None:
        return replace(state, previous_loss=loss)
    ratio = loss / state.previous_loss
    scale = state.scale
    if ratio > 1.0 + config.increase_threshold:
        scale = scale * (1.0 - config.decrease_factor)
    elif ratio < 1.0 + config.flat_threshold:
        scale = min(1.0, scale * (1.0 + config.increase_factor))
    return LineSearchState(scale=scale, previous_loss=loss)


def effective_lr(state: LineSearchState, global_lr: float) -> float:
    """Step length actually applied: global rate times the current scale."""
    if not global_lr > 0.0:
        raise ValueError(f"global_lr must be positive, got {global_lr}")
    return global_lr * state.scale
