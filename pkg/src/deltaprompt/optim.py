"""SGD with classical momentum and an optional cosine learning-rate decay."""

from __future__ import annotations

import math

import numpy as np

from .autodiff import Tensor
from .errors import ConfigError, NumericError

SCHEDULES = ("constant", "cosine")


def cosine_lr(base_lr: float, step: int, total_steps: int) -> float:
    """lr at ``step`` of ``total_steps``: 0.5 * base * (1 + cos(pi * t / T))."""
    if total_steps <= 0:
        raise ConfigError("cosine_lr: total_steps must be positive")
    t = min(max(step, 0), total_steps)
    return 0.5 * base_lr * (1.0 + math.cos(math.pi * t / total_steps))


class SGD:
    """Momentum SGD over named parameters.

    Update per step: ``v = momentum * v + grad`` then ``p = p - lr * v``.
    Gradients are cleared after each step; a registered parameter without a
    gradient is an error (it means the loss graph never reached it).
    """

    def __init__(
        self,
        params: dict[str, Tensor],
        lr: float,
        momentum: float = 0.9,
        schedule: str = "cosine",
        total_steps: int | None = None,
    ):
        if not params:
            raise ConfigError("SGD: no parameters")
        if schedule not in SCHEDULES:
            raise ConfigError(f"SGD: unknown schedule {schedule!r}")
        if schedule == "cosine" and (total_steps is None or total_steps <= 0):
            raise ConfigError("SGD: cosine schedule needs positive total_steps")
        if lr < 0 or not (0.0 <= momentum < 1.0):
            raise ConfigError("SGD: need lr >= 0 and 0 <= momentum < 1")
        self.params = dict(params)
        self.base_lr = float(lr)
        self.momentum = float(momentum)
        self.schedule = schedule
        self.total_steps = total_steps
        self.step_count = 0
        self.velocity = {k: np.zeros_like(p.data) for k, p in self.params.items()}

    def current_lr(self) -> float:
        if self.schedule == "constant":
            return self.base_lr
        return cosine_lr(self.base_lr, self.step_count, self.total_steps)

    def step(self) -> None:
        lr = self.current_lr()
        for name, p in self.params.items():
            if p.grad is None:
                raise NumericError(f"SGD: parameter {name!r} has no gradient")
            if p.grad.shape != p.data.shape:
                raise NumericError(f"SGD: gradient shape mismatch for {name!r}")
            v = self.velocity[name]
            v *= self.momentum
            v += p.grad
            p.data -= lr * v
            if not np.isfinite(p.data).all():
                raise NumericError(f"SGD: parameter {name!r} became non-finite")
            p.grad = None
        self.step_count += 1
