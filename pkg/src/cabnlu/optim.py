"""First-order optimizers operating on named parameter dictionaries."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .errors import ConfigError, ShapeError


@dataclass
class OptimizerState:
    """SGD or Adam state; moment buffers are allocated lazily per parameter."""

    kind: str = "adam"
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.kind not in ("sgd", "adam"):
            raise ConfigError(f"unknown optimizer kind {self.kind!r}")
        if self.learning_rate <= 0:
            raise ConfigError(f"learning rate must be positive, got {self.learning_rate}")


def optimizer_step(params: dict[str, np.ndarray],
                   grads: Mapping[str, np.ndarray | None],
                   state: OptimizerState) -> None:
    """Apply one in-place update to every parameter.

    Missing or None gradient entries are treated as zero.
    """
    state.step_count += 1
    t = state.step_count
    lr = state.learning_rate
    if state.kind == "adam":
        bc1 = 1.0 - state.beta1 ** t
        bc2 = 1.0 - state.beta2 ** t
    for name, p in params.items():
        g = grads.get(name)
        if g is not None and g.shape != p.shape:
            raise ShapeError(f"grad shape {g.shape} does not match param {name!r} shape {p.shape}")
        if state.kind == "sgd":
            if g is not None:
                p -= lr * g
            continue
        m = state.m.get(name)
        if m is None:
            m = state.m[name] = np.zeros_like(p)
        v = state.v.get(name)
        if v is None:
            v = state.v[name] = np.zeros_like(p)
        if g is None:
            g = np.zeros_like(p)
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.epsilon)
