"""Adam optimizer over named parameter tensors."""

from __future__ import annotations

from collections.abc import Mapping
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigurationError, TrainingError
from .tensor import Array, ParamTensor


@dataclass
class AdamState:
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    step_count: int = 0
    first_moment: dict[str, Array] = field(default_factory=dict)
    second_moment: dict[str, Array] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.learning_rate <= 0:
            raise ConfigurationError("learning_rate must be positive")
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise ConfigurationError("Adam betas must lie in [0, 1)")


def adam_step(params: Mapping[str, ParamTensor], state: AdamState) -> AdamState:
    """Apply one bias-corrected Adam update in place and clear the gradients.

    All gradients are checked before any parameter moves, so a non-finite gradient
    leaves both parameters and state untouched.
    """
    for name, param in params.items():
        if param.grad is None or param.grad.shape != param.data.shape:
            raise TrainingError(f"gradient of {name} is missing or misshapen", parameter=name)
        if not np.all(np.isfinite(param.grad)):
            raise TrainingError(f"non-finite gradient in {name}", parameter=name)

    state.step_count += 1
    bc1 = 1.0 - state.beta1**state.step_count
    bc2 = 1.0 - state.beta2**state.step_count
    step_size = state.learning_rate / bc1

    for name, param in params.items():
        g = param.grad
        assert g is not None
        if name not in state.first_moment:
            state.first_moment[name] = np.zeros_like(param.data)
            state.second_moment[name] = np.zeros_like(param.data)
        m = state.first_moment[name]
        v = state.second_moment[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        param.data -= step_size * m / (np.sqrt(v / bc2) + state.epsilon)
        param.zero_grad()
    return state
