"""Global learning-rate schedule: linear warmup, stepped exponential decay.

The peak rate scales linearly with the effective batch size relative to a
reference batch of 256.  Training warms up linearly from a small initial
rate, then decays by a constant factor once per decay interval; the factor
is solved from the endpoints so the final step lands on `final_lr`
exactly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import ConfigError


@dataclass(frozen=True)
class ScheduleConfig:
    batch_size: int
    total_epochs: float
    steps_per_epoch: int
    initial_lr: float = 0.001
    final_lr: float = 0.001
    warmup_epochs: float = 5.0
    decay_interval_epochs: float = 2.0
    base_lr: float = 0.1
    reference_batch: int = 256

    def __post_init__(self):
        if self.batch_size < 1 or self.reference_batch < 1:
            raise ConfigError("batch sizes must be >= 1")
        if self.steps_per_epoch < 1:
            raise ConfigError(f"steps_per_epoch must be >= 1, got {self.steps_per_epoch}")
        if self.base_lr <= 0.0:
            raise ConfigError(f"base_lr must be positive, got {self.base_lr}")
        peak = self.peak_lr
        if not 0.0 < self.initial_lr <= peak:
            raise ConfigError(
                f"initial_lr must lie in (0, peak_lr={peak:g}], got {self.initial_lr}"
            )
        if not 0.0 < self.final_lr <= peak:
            raise ConfigError(
                f"final_lr must lie in (0, peak_lr={peak:g}], got {self.final_lr}"
            )
        if not 0.0 <= self.warmup_epochs < self.total_epochs:
            raise ConfigError(
                f"need 0 <= warmup_epochs < total_epochs, got "
                f"{self.warmup_epochs} vs {self.total_epochs}"
            )
        if self.decay_interval_epochs <= 0.0:
            raise ConfigError("decay_interval_epochs must be positive")
        if self.decay_interval_steps < 1:
            raise ConfigError("decay interval shorter than one step")
        if self.decay_count == 0 and self.final_lr != peak:
            raise ConfigError(
                "no complete decay interval fits between warmup and the last step, "
                "so final_lr cannot be reached; lengthen training or set final_lr = peak_lr"
            )

    @property
    def peak_lr(self) -> float:
        return self.base_lr * self.batch_size / self.reference_batch

    @property
    def total_steps(self) -> int:
        return int(math.floor(self.total_epochs * self.steps_per_epoch))

    @property
    def warmup_steps(self) -> int:
        return int(math.floor(self.warmup_epochs * self.steps_per_epoch))

    @property
    def decay_interval_steps(self) -> int:
        return int(math.floor(self.decay_interval_epochs * self.steps_per_epoch))

    @property
    def decay_count(self) -> int:
        """Number of decay events applied by the final step."""
        last = self.total_steps - 1
        if last < self.warmup_steps:
            return 0
        return (last - self.warmup_steps) // self.decay_interval_steps

    @property
    def decay_factor(self) -> float:
        k = self.decay_count
        if k == 0:
            return 1.0
        return (self.final_lr / self.peak_lr) ** (1.0 / k)


def lr_at(config: ScheduleConfig, step: int) -> float:
    """Global learning rate for 0-based `step`.

    Warmup interpolates linearly from initial_lr (at step 0) to peak_lr;
    afterwards the rate drops by `decay_factor` once per completed decay
    interval, reaching final_lr exactly on the last scheduled step.
    Queries past the end of training stay at final_lr.
    """
    if step < 0:
        raise ValueError(f"step must be >= 0, got {step}")
    peak = config.peak_lr
    w = config.warmup_steps
    if w > 0 and step < w:
        lr = config.initial_lr + (peak - config.initial_lr) * (step / w)
    else:
        k = (step - w) // config.decay_interval_steps
        if k >= config.decay_count:
            lr = config.final_lr
        else:
            lr = peak * config.decay_factor**k
    lo = min(config.initial_lr, config.final_lr)
    return min(max(lr, lo), peak)


def default_regime(batch_size: int, regime_scale: float = 1.0) -> tuple[float, float]:
    """Default (warmup_epochs, final_lr) for an effective batch size.

    Warmup lengthens and the floor rate rises as the batch crosses the
    large-batch thresholds (8192 and 32768, scaled by `regime_scale` when a
    benchmark rescales its batch axis).
    """
    if regime_scale <= 0.0:
        raise ConfigError(f"regime_scale must be positive, got {regime_scale}")
    small = 8192 * regime_scale
    big = 32768 * regime_scale
    if batch_size <= small:
        warmup = 5.0
    elif batch_size <= big:
        warmup = 15.0
    else:
        warmup = 30.0
    final_lr = 0.001 if batch_size < small else 0.01
    return warmup, final_lr


def default_schedule_for(
    batch_size: int,
    total_epochs: float,
    steps_per_epoch: int,
    regime_scale: float = 1.0,
) -> ScheduleConfig:
    """Standard schedule for a given effective batch size."""
    warmup, final_lr = default_regime(batch_size, regime_scale)
    return ScheduleConfig(
        batch_size=batch_size,
        total_epochs=total_epochs,
        steps_per_epoch=steps_per_epoch,
        initial_lr=0.001,
        final_lr=final_lr,
        warmup_epochs=warmup,
        decay_interval_epochs=2.0,
    )
