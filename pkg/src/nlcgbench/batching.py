"""Mini-batch scheduling and virtual large batches.

A `BatchPlan` walks a dataset in shuffled epochs, handing out an effective
batch per step as `virtual_factor` disjoint micro-batches.  Averaging the
micro-batch evaluations size-weighted reproduces the single large-batch
evaluation, which lets desk-scale hardware mimic large-batch training.
The per-epoch shuffle is a pure function of (seed, epoch), so any step's
batch can be reproduced from the plan parameters alone.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NumericError
from .numerics import ParamVector
from .problems import BatchEval, Problem


@dataclass
class BatchPlan:
    dataset_size: int
    micro_batch_size: int
    virtual_factor: int = 1
    seed: int = 0
    drop_fraction: float = 0.0
    allow_wraparound: bool = False

    epoch: int = field(default=0, init=False)
    cursor: int = field(default=0, init=False)
    draws: int = field(default=0, init=False)
    _perm: np.ndarray | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.dataset_size < 1:
            raise ConfigError(f"dataset_size must be >= 1, got {self.dataset_size}")
        if self.micro_batch_size < 1:
            raise ConfigError(f"micro_batch_size must be >= 1, got {self.micro_batch_size}")
        if self.virtual_factor < 1:
            raise ConfigError(f"virtual_factor must be >= 1, got {self.virtual_factor}")
        if not 0.0 <= self.drop_fraction < 1.0:
            raise ConfigError(f"drop_fraction must lie in [0, 1), got {self.drop_fraction}")
        if self.effective_batch > self.dataset_size and not self.allow_wraparound:
            raise ConfigError(
                f"effective batch {self.effective_batch} exceeds dataset size "
                f"{self.dataset_size}; set allow_wraparound to sample across epochs"
            )

    @property
    def effective_batch(self) -> int:
        return self.micro_batch_size * self.virtual_factor

    @property
    def steps_per_epoch(self) -> int:
        return max(1, self.dataset_size // self.effective_batch)

    def _epoch_permutation(self, epoch: int) -> np.ndarray:
        return np.random.default_rng((self.seed, epoch)).permutation(self.dataset_size)


def next_batch(plan: BatchPlan) -> list[np.ndarray]:
    """Draw the next effective batch as a list of disjoint micro-batch index arrays.

    Epochs reshuffle deterministically; a partial tail that cannot fill an
    effective batch is dropped (or, with `allow_wraparound`, batches span
    epoch boundaries so oversized batches still work).
    """
    if plan._perm is None:
        plan._perm = plan._epoch_permutation(plan.epoch)

    need = plan.effective_batch
    taken: list[np.ndarray] = []
    while need > 0:
        remaining = plan.dataset_size - plan.cursor
        if remaining < need and not plan.allow_wraparound:
            # drop the tail, start the next epoch
            plan.epoch += 1
            plan.cursor = 0
            plan._perm = plan._epoch_permutation(plan.epoch)
            remaining = plan.dataset_size
        take = min(need, remaining)
        taken.append(plan._perm[plan.cursor : plan.cursor + take])
        plan.cursor += take
        need -= take
        if plan.cursor == plan.dataset_size:
            plan.epoch += 1
            plan.cursor = 0
            plan._perm = plan._epoch_permutation(plan.epoch)

    indices = taken[0] if len(taken) == 1 else np.concatenate(taken)
    micro = [
        indices[i * plan.micro_batch_size : (i + 1) * plan.micro_batch_size]
        for i in range(plan.virtual_factor)
    ]

    if plan.drop_fraction > 0.0 and plan.virtual_factor > 1:
        keep = max(1, plan.virtual_factor - int(round(plan.virtual_factor * plan.drop_fraction)))
        if keep < plan.virtual_factor:
            rng = np.random.default_rng((plan.seed, 9973, plan.draws))
            kept = np.sort(rng.choice(plan.virtual_factor, size=keep, replace=False))
            micro = [micro[i] for i in kept]

    plan.draws += 1
    return micro


def averaged_gradient(
    problem: Problem, weights: ParamVector, micro_batches: list[np.ndarray]
) -> BatchEval:
    """Size-weighted mean of per-micro-batch evaluations, in a fixed order.

    Equals the evaluation over the union batch up to floating-point
    reassociation, since batch losses and gradients are sample means.
    """
    if not micro_batches:
        raise ValueError("need at least one micro-batch")
    if len(micro_batches) == 1:
        try:
            return problem.evaluate(weights, micro_batches[0])
        except NumericError as exc:
            raise NumericError(f"micro-batch 0: {exc}") from exc
    total = 0
    loss_sum = 0.0
    grad_sum: np.ndarray | None = None
    for i, batch in enumerate(micro_batches):
        try:
            ev = problem.evaluate(weights, batch)
        except NumericError as exc:
            raise NumericError(f"micro-batch {i}: {exc}") from exc
        count = len(batch) if batch is not None else 1
        total += count
        loss_sum += count * ev.loss
        if grad_sum is None:
            grad_sum = count * ev.gradient
        else:
            grad_sum = grad_sum + count * ev.gradient
    return BatchEval(loss=loss_sum / total, gradient=grad_sum / total)
