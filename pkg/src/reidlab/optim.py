"""Plain SGD with a two-phase step learning-rate schedule."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NumericalFailureError


@dataclass(frozen=True)
class SgdConfig:
    base_lr: float = 0.001
    drop_lr: float = 0.0001
    drop_fraction: float = 5.0 / 6.0
    momentum: float = 0.0
    total_iterations: int = 5000

    def validate(self) -> None:
        if not (0.0 < self.drop_lr <= self.base_lr):
            raise ConfigError("sgd: requires 0 < drop_lr <= base_lr")
        if not (0.0 < self.drop_fraction <= 1.0):
            raise ConfigError("sgd.drop_fraction: must be in (0, 1]")
        if self.momentum < 0.0 or self.momentum >= 1.0:
            raise ConfigError("sgd.momentum: must be in [0, 1)")
        if self.total_iterations < 1:
            raise ConfigError("sgd.total_iterations: must be >= 1")


def learning_rate(cfg: SgdConfig, iteration: int) -> float:
    """Step schedule: base_lr until the drop point, drop_lr after.

    The single drop happens at floor(drop_fraction * total_iterations).
    """
    drop_at = int(np.floor(cfg.drop_fraction * cfg.total_iterations))
    return cfg.base_lr if iteration < drop_at else cfg.drop_lr


class SgdOptimizer:
    """Updates a fixed list of parameter arrays in place.

    Velocity buffers are only allocated when momentum is enabled.
    """

    def __init__(self, cfg: SgdConfig, params: list[np.ndarray]):
        cfg.validate()
        self.cfg = cfg
        self.params = params
        self.velocities = (
            [np.zeros_like(p) for p in params] if cfg.momentum > 0.0 else None
        )

    def step(self, grads: list[np.ndarray], iteration: int) -> float:
        if iteration >= self.cfg.total_iterations:
            raise ConfigError(
                f"iteration {iteration} out of range [0, {self.cfg.total_iterations})"
            )
        if len(grads) != len(self.params):
            raise ConfigError("gradient list length does not match parameter list")
        lr = learning_rate(self.cfg, iteration)
        for i, (p, g) in enumerate(zip(self.params, grads)):
            if self.velocities is not None:
                v = self.velocities[i]
                v *= self.cfg.momentum
                v += g
                p -= lr * v
            else:
                p -= lr * g
            if not np.all(np.isfinite(p)):
                raise NumericalFailureError("non-finite parameter after SGD update")
        return lr


def sgd_step(
    net, grads, cfg: SgdConfig, iteration: int, state: SgdOptimizer | None = None
) -> float:
    """One update on an embedding network; returns the lr used.

    Pass a persistent SgdOptimizer as `state` for the momentum term to
    accumulate across iterations; without it each call starts cold.
    """
    opt = state if state is not None else SgdOptimizer(cfg, net.parameters())
    return opt.step(net.gradient_list(grads), iteration)
