"""First-order optimizers over named parameter nodes."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .graph import Node


class NonFiniteGradientError(FloatingPointError):
    def __init__(self, name: str):
        self.param = name
        super().__init__(f"non-finite gradient for parameter {name!r}")


@dataclass
class OptimizerState:
    lr: float
    step: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        if not self.lr > 0:
            raise ValueError(f"learning rate must be positive, got {self.lr}")


def clip_by_global_norm(grads: Mapping[str, np.ndarray], max_norm: float) -> float:
    """Scale ``grads`` in place so their joint L2 norm is at most ``max_norm``."""
    total = float(np.sqrt(sum(float(np.sum(g * g)) for g in grads.values())))
    if total > max_norm > 0:
        scale = max_norm / total
        for g in grads.values():
            g *= scale
    return total


class Optimizer:
    def __init__(self, params: Mapping[str, Node], lr: float, clip_norm: float | None = None):
        self.params = dict(params)
        self.state = OptimizerState(lr=lr)
        self.clip_norm = clip_norm

    def step(self, grads: Mapping[str, np.ndarray]) -> None:
        """Update every parameter in place from ``grads`` (keyed by name)."""
        grads = {k: np.array(grads[k], copy=True) for k in self.params if k in grads}
        for name, g in grads.items():
            if g.shape != self.params[name].value.shape:
                raise ValueError(f"gradient shape {g.shape} does not match parameter "
                                 f"{name!r} {self.params[name].value.shape}")
            if not np.all(np.isfinite(g)):
                raise NonFiniteGradientError(name)
        if self.clip_norm:
            clip_by_global_norm(grads, self.clip_norm)
        self.state.step += 1
        for name, g in grads.items():
            self._update(name, self.params[name], g)

    def _update(self, name: str, param: Node, grad: np.ndarray) -> None:
        raise NotImplementedError


class SGD(Optimizer):
    def _update(self, name, param, grad):
        param.value -= self.state.lr * grad


class Adam(Optimizer):
    def __init__(self, params, lr=1e-4, beta1=0.9, beta2=0.999, eps=1e-8, clip_norm=None):
        super().__init__(params, lr, clip_norm)
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        for name, p in self.params.items():
            self.state.first_moment[name] = np.zeros_like(p.value)
            self.state.second_moment[name] = np.zeros_like(p.value)

    def _update(self, name, param, grad):
        m = self.state.first_moment[name]
        v = self.state.second_moment[name]
        m *= self.beta1
        m += (1.0 - self.beta1) * grad
        v *= self.beta2
        v += (1.0 - self.beta2) * grad * grad
        t = self.state.step
        m_hat = m / (1.0 - self.beta1 ** t)
        v_hat = v / (1.0 - self.beta2 ** t)
        param.value -= self.state.lr * m_hat / (np.sqrt(v_hat) + self.eps)


def make_optimizer(kind: str, params: Mapping[str, Node], lr: float,
                   clip_norm: float | None = None) -> Optimizer:
    if kind == "adam":
        return Adam(params, lr=lr, clip_norm=clip_norm)
    if kind == "sgd":
        return SGD(params, lr=lr, clip_norm=clip_norm)
    raise ValueError(f"unknown optimizer {kind!r}")
