"""Bias-corrected Adam update, shared by the CW attack and training."""
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    t: int = 0

    @classmethod
    def zeros(cls, shape):
        return cls(np.zeros(shape), np.zeros(shape), 0)


def adam_step(state, gradient, lr=0.01, beta1=0.9, beta2=0.999, eps=1e-8):
    """Advance ``state`` by one gradient and return ``(new_state, update)``.

    ``update`` is added to the parameters; it points downhill.
    """
    g = np.asarray(gradient, dtype=np.float64)
    t = state.t + 1
    m = beta1 * state.m + (1.0 - beta1) * g
    v = beta2 * state.v + (1.0 - beta2) * g * g
    m_hat = m / (1.0 - beta1 ** t)
    v_hat = v / (1.0 - beta2 ** t)
    update = -lr * m_hat / (np.sqrt(v_hat) + eps)
    return AdamState(m, v, t), update
