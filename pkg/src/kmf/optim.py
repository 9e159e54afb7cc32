"""Adam optimizer with bias correction.

Parameters are updated in place; moment buffers live in :class:`AdamState`
keyed by parameter name, so the same state object can be carried across
steps and serialized if needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor

__all__ = ["AdamState", "adam_step"]


@dataclass
class AdamState:
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)


def adam_step(
    params: dict[str, Tensor],
    grads: dict[str, np.ndarray],
    state: AdamState,
) -> tuple[dict[str, Tensor], AdamState]:
    """Apply one Adam update to every parameter present in ``grads``.

    Moment buffers are created lazily with the parameter's shape.  Parameters
    are mutated in place and the (params, state) pair is returned.
    """
    state.step += 1
    t = state.step
    correction1 = 1.0 - state.beta1**t
    correction2 = 1.0 - state.beta2**t
    for name, tensor in params.items():
        grad = np.asarray(grads[name], dtype=np.float64)
        if grad.shape != tensor.data.shape:
            raise ValueError(
                f"adam_step: gradient shape {grad.shape} does not match "
                f"parameter {name!r} shape {tensor.data.shape}"
            )
        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        if m is None:
            m = np.zeros_like(tensor.data)
            v = np.zeros_like(tensor.data)
        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
        state.first_moment[name] = m
        state.second_moment[name] = v
        m_hat = m / correction1
        v_hat = v / correction2
        tensor.data = tensor.data - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return params, state
