"""AdamW with decoupled weight decay and the AMSGrad second-moment maximum."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from hypersindy.autodiff import ContractError, Tensor


@dataclass
class AdamWState:
    learning_rate: float = 0.005
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    weight_decay: float = 0.01
    amsgrad: bool = True
    step_count: int = 0
    first_moment: list[np.ndarray] = field(default_factory=list)
    second_moment: list[np.ndarray] = field(default_factory=list)
    max_second_moment: list[np.ndarray] = field(default_factory=list)


def adamw_init(params: list[Tensor], **hyper) -> AdamWState:
    state = AdamWState(**hyper)
    state.first_moment = [np.zeros_like(p.data) for p in params]
    state.second_moment = [np.zeros_like(p.data) for p in params]
    state.max_second_moment = [np.zeros_like(p.data) for p in params]
    return state


def adamw_step(params: list[Tensor], state: AdamWState) -> None:
    """Update ``params`` in place from their ``.grad`` and zero the grads.

    A parameter whose grad is ``None`` after a backward pass was unused by the
    loss; it is treated as having a zero gradient. Calling this before any
    gradient exists at all is a contract error.
    """
    if len(params) != len(state.first_moment):
        raise ContractError("adamw_step: parameter list does not match optimizer state")
    if all(p.grad is None for p in params):
        raise ContractError("adamw_step: no gradients populated; call backward first")

    state.step_count += 1
    t = state.step_count
    b1, b2, lr = state.beta1, state.beta2, state.learning_rate
    bias1 = 1.0 - b1**t
    bias2 = 1.0 - b2**t
    for i, p in enumerate(params):
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        p.data *= 1.0 - lr * state.weight_decay
        m = state.first_moment[i]
        v = state.second_moment[i]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        if state.amsgrad:
            vmax = state.max_second_moment[i]
            np.maximum(vmax, v, out=vmax)
            denom = np.sqrt(vmax / bias2) + state.epsilon
        else:
            denom = np.sqrt(v / bias2) + state.epsilon
        p.data -= lr * (m / bias1) / denom
        p.grad = None
